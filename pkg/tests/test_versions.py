"""Version parsing and total ordering, checked against a brute-force oracle."""

import itertools
from functools import cmp_to_key

import pytest
from hypothesis import given, strategies as st

from solcat.coords import Coordinates, Ordering, Version, compare_versions


def oracle_compare(a: Version, b: Version) -> int:
    """Independent comparison oracle, written directly from the ordering rules.

    Kept deliberately separate from the implementation: no key function,
    plain pairwise rule application.
    """
    if a.major != b.major:
        return -1 if a.major < b.major else 1
    if a.minor != b.minor:
        return -1 if a.minor < b.minor else 1
    if a.patch != b.patch:
        return -1 if a.patch < b.patch else 1
    # same release triple: a prerelease sorts below the release
    if a.prerelease and not b.prerelease:
        return -1
    if b.prerelease and not a.prerelease:
        return 1
    for i in range(min(len(a.prerelease), len(b.prerelease))):
        x, y = a.prerelease[i], b.prerelease[i]
        if x == y:
            continue
        if x.isdigit() and y.isdigit():
            return -1 if int(x) < int(y) else 1
        return -1 if x < y else 1
    if len(a.prerelease) != len(b.prerelease):
        return -1 if len(a.prerelease) < len(b.prerelease) else 1
    return 0


COMPONENTS = [0, 1, 2, 10]
PRERELEASES = [(), ("rc", "1"), ("rc", "2")]


def version_grid() -> list[Version]:
    return [
        Version(major, minor, patch, pre)
        for major, minor, patch, pre in itertools.product(
            COMPONENTS, COMPONENTS, COMPONENTS, PRERELEASES
        )
    ]


def test_component_order():
    assert compare_versions(Version.parse("1.2.0"), Version.parse("1.10.0")) is Ordering.LESS


def test_prerelease_below_release():
    assert compare_versions(Version.parse("2.0.0-rc.1"), Version.parse("2.0.0")) is Ordering.LESS


def test_prerelease_identifier_order():
    assert compare_versions(Version.parse("1.0.0-rc.2"), Version.parse("1.0.0-rc.10")) is Ordering.LESS
    assert compare_versions(Version.parse("1.0.0-alpha"), Version.parse("1.0.0-beta")) is Ordering.LESS
    # shorter identifier list sorts first on a common prefix
    assert compare_versions(Version.parse("1.0.0-rc"), Version.parse("1.0.0-rc.1")) is Ordering.LESS


def test_grid_matches_oracle_and_is_total_order():
    grid = version_grid()
    ranked = sorted(grid, key=cmp_to_key(oracle_compare))
    rank = {v.render(): i for i, v in enumerate(ranked)}
    for a, b in itertools.product(grid, grid):
        got = compare_versions(a, b)
        expected = oracle_compare(a, b)
        assert got.value == expected, f"{a} vs {b}"
        # agreement with a strict integer ranking implies antisymmetry
        # and transitivity over the whole grid
        diff = rank[a.render()] - rank[b.render()]
        assert got.value == (0 if diff == 0 else (-1 if diff < 0 else 1))
        assert (got is Ordering.EQUAL) == (a.render() == b.render())


@pytest.mark.parametrize(
    "text",
    ["1.2.0", "0.0.0", "10.2.3-rc.1", "1.0.0-alpha.beta-x.7"],
)
def test_parse_render_round_trip(text):
    assert Version.parse(text).render() == text


@pytest.mark.parametrize(
    "text",
    ["1.2", "1.2.3.4", "01.2.3", "1.2.3-", "1.2.3-rc..1", "-1.2.3", "1.2.3-rc.01", "a.b.c", ""],
)
def test_parse_rejects_malformed(text):
    with pytest.raises(ValueError):
        Version.parse(text)


version_st = st.builds(
    Version,
    st.integers(min_value=0, max_value=999),
    st.integers(min_value=0, max_value=999),
    st.integers(min_value=0, max_value=999),
    st.lists(
        st.one_of(
            st.integers(min_value=0, max_value=99).map(str),
            st.from_regex(r"[a-z][a-z0-9-]{0,5}", fullmatch=True),
        ),
        max_size=3,
    ).map(tuple),
)


@given(version_st)
def test_round_trip_generated(version):
    assert Version.parse(version.render()) == version


@given(version_st, version_st)
def test_equal_iff_same_rendering(a, b):
    assert (compare_versions(a, b) is Ordering.EQUAL) == (a.render() == b.render())


def test_coordinates_round_trip():
    coords = Coordinates.parse("org.example:seg:1.2.0")
    assert coords.group == "org.example"
    assert coords.name == "seg"
    assert coords.version == Version(1, 2, 0)
    assert coords.render() == "org.example:seg:1.2.0"


@pytest.mark.parametrize(
    "text",
    [
        "Org:name:1.0.0",       # uppercase group
        "org:na.me:1.0.0",      # dot in name
        "org:name",             # missing version
        "org:name:1.0",         # short version
        ":name:1.0.0",
        "org::1.0.0",
    ],
)
def test_coordinates_rejects_malformed(text):
    with pytest.raises(ValueError):
        Coordinates.parse(text)
