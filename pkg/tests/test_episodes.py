import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbnepisode.episodes import (
    Episode,
    EpisodeCounter,
    conflict_gaps,
    count_aligned,
    count_distinct,
    count_on_demand,
    format_dump,
    max_disjoint,
    mine_frequent,
    occurrence_starts,
    parse_dump,
    span,
)
from dbnepisode.events import Alphabet, EventStream, parse_events

from oracles import all_episodes, distinct_count

AB = Alphabet(("A", "B"))
ABCD = Alphabet(("A", "B", "C", "D"))


def stream_of(spec: dict[str, list[int]], alphabet: Alphabet, horizon=None) -> EventStream:
    return EventStream.from_events(
        [(alphabet.index(k), t) for k, ts in spec.items() for t in ts], alphabet, horizon
    )


@st.composite
def small_streams(draw, max_events=30, max_types=4, max_tick=40):
    M = draw(st.integers(1, max_types))
    events = draw(st.lists(st.tuples(st.integers(0, M - 1), st.integers(1, max_tick)), max_size=max_events))
    return EventStream.from_events(events, Alphabet(tuple("ABCD"[:M])))


@st.composite
def episodes_for(draw, M, max_size=4, max_delay=4):
    size = draw(st.integers(1, max_size))
    types = tuple(draw(st.integers(0, M - 1)) for _ in range(size))
    delays = tuple(draw(st.integers(0, max_delay)) for _ in range(size - 1))
    return Episode(types, delays)


def test_span_examples():
    assert span(Episode((0, 1, 2), (3, 5))) == 8
    assert span(Episode((0,))) == 0
    assert span(Episode((0, 1), (0,))) == 0


def test_episode_validation():
    with pytest.raises(ValueError):
        Episode((0, 1), ())
    with pytest.raises(ValueError):
        Episode((0, 1), (-1,))


def test_episode_format_parse():
    ep = Episode((0, 1, 2), (3, 5))
    assert ep.format(ABCD) == "A -3-> B -5-> C"
    assert Episode.parse("A -3-> B -5-> C", ABCD) == ep
    with pytest.raises(ValueError):
        Episode.parse("A -3->", ABCD)


def test_worked_example_count():
    abc = Alphabet(("A", "B", "C"))
    s = stream_of({"C": [1, 4, 5, 8, 9], "B": [2, 3, 6]}, abc)
    ep = Episode((1, 2), (2,))
    # smallest window admitting the span; every occurrence ends after it
    assert count_distinct(s, ep, 2) == 3
    assert occurrence_starts(s, ep, 2).tolist() == [2, 3, 6]
    with pytest.raises(ValueError):
        count_distinct(s, ep, 0)


def test_projection_from_suffix():
    # extending (C) leftwards by B at delay 2 keeps those C ticks with a B two ticks earlier
    abc = Alphabet(("A", "B", "C"))
    s = stream_of({"C": [1, 4, 5, 8, 9], "B": [2, 3, 6]}, abc)
    d_c = s.index.ticks(2)
    assert d_c.tolist() == [1, 4, 5, 8, 9]
    cand = d_c - 2
    cand = cand[cand >= 1]
    d_beta = cand[s.index.present[1, cand]]
    assert d_beta.tolist() == [2, 3, 6]


def test_single_node_counts_every_event():
    s = stream_of({"A": [1, 2, 3, 7], "B": [2]}, AB)
    assert count_distinct(s, Episode((0,)), 0) == 4
    assert count_distinct(s, Episode((0,)), 2) == 2


def test_empty_episode_counts_windows():
    s = stream_of({"A": [1, 9]}, AB)
    assert count_distinct(s, Episode(()), 3) == 6


def test_same_event_twice_is_impossible():
    s = stream_of({"A": [1, 2, 3]}, AB)
    assert conflict_gaps(Episode((0, 0), (0,))) is None
    assert count_distinct(s, Episode((0, 0), (0,)), 2) == 0


def test_greedy_is_not_maximum():
    # A -1-> B -1-> A -2-> B occurs at starts 1, 3 and 4. Starts 1 and 3 share
    # the A at tick 3, starts 1 and 4 share the B at tick 5; 3 and 4 are disjoint.
    s = stream_of({"A": [1, 3, 4, 5, 6], "B": [2, 4, 5, 7, 8]}, AB)
    ep = Episode((0, 1, 0, 1), (1, 1, 2))
    assert occurrence_starts(s, ep, 4).tolist() == [1, 3, 4]
    assert count_distinct(s, ep, 4) == 2
    assert distinct_count(s.events, ep.types, ep.delays, 4, s.T) == 2


def test_max_disjoint_small_cases():
    assert max_disjoint([], frozenset({1})) == 0
    assert max_disjoint([1, 2, 3, 4], frozenset({1})) == 2
    assert max_disjoint([1, 2, 3, 4], frozenset()) == 4
    assert max_disjoint([1, 3, 4], frozenset({2, 3})) == 2


@given(st.lists(st.integers(1, 30), max_size=14, unique=True), st.sets(st.integers(1, 5), min_size=1, max_size=3))
def test_max_disjoint_matches_exhaustive(starts, gaps):
    starts = sorted(starts)
    best = 0
    n = len(starts)
    for mask in range(1 << n):
        chosen = [starts[i] for i in range(n) if mask >> i & 1]
        if all(abs(a - b) not in gaps for i, a in enumerate(chosen) for b in chosen[i + 1:]):
            best = max(best, len(chosen))
    assert max_disjoint(starts, frozenset(gaps)) == best


@given(small_streams(), st.data(), st.integers(0, 8))
@settings(max_examples=300)
def test_count_matches_bruteforce(stream, data, W):
    ep = data.draw(episodes_for(stream.M))
    if ep.span > W:
        with pytest.raises(ValueError):
            count_distinct(stream, ep, W)
        return
    expected = distinct_count(stream.events, ep.types, ep.delays, W, stream.T)
    assert count_distinct(stream, ep, W) == expected


@given(small_streams(), st.data())
@settings(max_examples=100)
def test_distinct_types_count_is_naive_scan(stream, data):
    ep = data.draw(episodes_for(stream.M, max_delay=3))
    if len(set(ep.types)) != len(ep.types) or any(d < 1 for d in ep.delays):
        return
    W = 8
    ev = set(stream.events)
    offs = ep.offsets
    naive = sum(
        1
        for t in range(1, stream.T + 1)
        if W < t + offs[-1] <= stream.T and all((j, t + o) in ev for j, o in zip(ep.types, offs))
    )
    assert count_distinct(stream, ep, W) == naive


def test_mine_deterministic_pairs():
    T = 1000
    events = [(0, t) for t in range(1, T, 2)] + [(1, t + 1) for t in range(1, T, 2)]
    s = EventStream.from_events(events, AB)
    table = mine_frequent(s, 5, 0.1, 1)
    ab = Episode((0, 1), (1,))
    assert ab in table
    assert table.entries[ab] == 498
    assert all(c > 0.1 * 995 for c in table.entries.values())
    assert all(e.span <= 5 for e in table.entries)


def test_mine_nothing_frequent():
    s = stream_of({"A": [1, 5], "B": [3]}, AB, horizon=100)
    assert len(mine_frequent(s, 5, 0.5, 3)) == 0


def test_mine_rejects_bad_params():
    s = stream_of({"A": [1]}, AB)
    for W, th, k in ((0, 0.1, 1), (5, -0.1, 1), (5, 0.1, 0)):
        with pytest.raises(ValueError):
            mine_frequent(s, W, th, k)


def canonical_frequent(stream, W, theta, k):
    """Oracle: enumerate every episode, keep the frequent, canonically ordered ones."""
    out = {}
    T = stream.T
    for size in range(1, k + 2):
        for types, delays in all_episodes(stream.M, size, W):
            # zero-delay neighbours are listed in ascending alphabet order
            if any(d == 0 and a >= b for a, b, d in zip(types, types[1:], delays)):
                continue
            c = distinct_count(stream.events, types, delays, W, T)
            if c > theta * (T - W):
                out[Episode(types, delays)] = c
    return out


def test_mine_example1_exhaustive():
    s = parse_events("time,label\n2,A\n3,B\n3,D\n5,B\n9,C\n10,A\n12,D")
    W = 12
    table = mine_frequent(s, W, 0.0, 1)
    # T - W = 0 leaves no windows: nothing can terminate after W
    assert len(table) == 0
    assert canonical_frequent(s, W, 0.0, 1) == {}
    # shifting the stream right by W makes every event count
    shifted = EventStream.from_events([(j, t + W) for j, t in s.events], s.alphabet)
    table = mine_frequent(shifted, W, 0.0, 1)
    assert table.entries == canonical_frequent(shifted, W, 0.0, 1)
    assert {len(e) for e in table.entries} == {1, 2}
    assert len(table.level(1)) == 4
    # 2-node episodes: every ordered pair of events at most W apart, minus same-type zero gaps
    assert Episode((0, 3), (10,)) in table and Episode((3, 1), (0,)) not in table


@given(small_streams(max_events=25, max_types=3, max_tick=25), st.sampled_from([0.0, 0.05, 0.1]), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_mine_matches_enumeration(stream, theta, W):
    if stream.T <= W:
        return
    table = mine_frequent(stream, W, theta, 2)
    assert table.entries == canonical_frequent(stream, W, theta, 2)


@given(small_streams(max_events=30, max_types=3, max_tick=30))
@settings(max_examples=40, deadline=None)
def test_mined_counts_are_consistent(stream):
    W = 4
    if stream.T <= W:
        return
    table = mine_frequent(stream, W, 0.0, 3)
    for ep, c in table.entries.items():
        assert c == count_distinct(stream, ep, W)
        if len(ep) >= 2:
            suffix = Episode(ep.types[1:], ep.delays[1:])
            assert c <= table.entries[suffix]


def test_mining_independent_of_jobs():
    rng = np.random.default_rng(3)
    alphabet = Alphabet(tuple("ABCDEF"))
    types = rng.integers(0, 6, 3000)
    ticks = rng.integers(1, 2000, 3000)
    s = EventStream.from_arrays(types, ticks, alphabet)
    a = mine_frequent(s, 6, 0.01, 2, jobs=1)
    b = mine_frequent(s, 6, 0.01, 2, jobs=3)
    assert list(a.entries.items()) == list(b.entries.items())
    assert format_dump(a, alphabet) == format_dump(b, alphabet)


def test_dump_roundtrip_and_order():
    s = parse_events("time,label\n2,A\n3,B\n3,D\n5,B\n9,C\n10,A\n12,D", horizon=30)
    table = mine_frequent(s, 4, 0.0, 2)
    text = format_dump(table, s.alphabet)
    rows = parse_dump("# header\n" + text, s.alphabet)
    assert [(e, c) for e, c, _ in rows] == table.sorted_items()
    keys = [e.sort_key() for e, _, _ in rows]
    assert keys == sorted(keys)
    first = text.splitlines()[0].split("\t")
    assert first[0] == "A" and first[1] == "1"


@given(small_streams(), st.data(), st.integers(1, 8))
@settings(max_examples=150)
def test_aligned_count_is_window_count(stream, data, W):
    ep = data.draw(episodes_for(stream.M, max_delay=3))
    if ep.span > W:
        return
    lag = data.draw(st.integers(0, W - ep.span))
    ev = set(stream.events)
    offs = ep.offsets
    # reference tick t sees the episode's last event at t - lag
    naive = sum(
        1
        for t in range(W + 1, stream.T + 1)
        if len(set(zip(ep.types, offs))) == len(offs)
        and all((j, t - lag - offs[-1] + o) in ev for j, o in zip(ep.types, offs))
    )
    assert count_aligned(stream, ep, W, lag) == naive
    assert EpisodeCounter(stream, W).aligned_count(ep, lag) == naive


def test_aligned_count_bad_lag():
    s = stream_of({"A": [1, 2]}, AB)
    with pytest.raises(ValueError):
        count_aligned(s, Episode((0, 1), (2,)), 3, 2)


def test_counter_memoizes():
    s = stream_of({"A": [1, 3, 5], "B": [2, 4, 6]}, AB)
    table = mine_frequent(s, 2, 0.0, 1)
    counter = EpisodeCounter(s, 2, table)
    ep = Episode((0, 1), (1,))
    assert counter.count(ep) == table.entries[ep]
    assert counter.scans == 0
    other = Episode((0, 1, 0), (1, 1))
    v = count_on_demand(s, other, 2, counter)
    assert v == count_distinct(s, other, 2)
    assert counter.scans == 1
    assert count_on_demand(s, other, 2, counter) == v
    assert counter.scans == 1
    with pytest.raises(ValueError):
        count_on_demand(s, other, 3, counter)
