import itertools

import pytest

from nakamoto_mfg.graphs import ancestors, automorphisms, class_by_name, enumerate_classes
from nakamoto_mfg.states import (CONVENTIONS, OWNED, RECEIVED, UNRECEIVED, GameState, count_states,
                                 decode, encode, get_convention, initial_state, local_graph,
                                 local_mask, state_space)


def _labeled_oracle(max_blocks):
    # owned blocks need every ancestor received
    total = 0
    for g in enumerate_classes(max_blocks):
        anc = [ancestors(g, x) for x in range(g.size)]
        for st in itertools.product((0, 1, 2), repeat=g.size):
            if all(st[x] != OWNED or all(st[a] != UNRECEIVED for a in anc[x]) for x in range(g.size)):
                total += 1
    return total


def _orbit_oracle(max_blocks):
    # Burnside: orbits of 3-colourings under each graph's automorphism group
    total = 0
    for g in enumerate_classes(max_blocks):
        autos = automorphisms(g)
        fixed = 0
        for a in autos:
            seen, cycles = set(), 0
            for i in range(g.size):
                if i not in seen:
                    cycles += 1
                    j = i
                    while j not in seen:
                        seen.add(j)
                        j = a[j]
            fixed += 3 ** cycles
        assert fixed % len(autos) == 0
        total += fixed // len(autos)
    return total


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_labeled_counts_match_oracle(m):
    assert len(state_space(m, "labeled")) == _labeled_oracle(m)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_orbit_counts_match_burnside(m):
    assert len(state_space(m, "orbit")) == _orbit_oracle(m)


def test_known_counts():
    assert len(state_space(1, "labeled")) == 3
    assert len(state_space(4, "labeled")) == 271
    assert len(state_space(5, "labeled")) == 1537
    assert len(state_space(4, "orbit")) == 303
    assert len(state_space(5, "orbit")) == 1788
    assert count_states(4) == {1: 3, 2: 8, 3: 42, 4: 218}


def test_labeled_m7_count():
    assert sum(count_states(7, "labeled").values()) == _labeled_oracle(7) == 53109


def test_encode_decode_roundtrip():
    for st in itertools.product((0, 1, 2), repeat=4):
        assert decode(encode(st), 4) == st


def test_initial_state():
    s = initial_state(4)
    assert s.graph.size == 1 and s.status == (RECEIVED,)


def test_local_mask_stops_at_missing_parent():
    g = class_by_name("g_3.2.1")  # a chain 0 <- 1 <- 2
    assert local_mask(GameState(-1, g, (1, 0, 1))) == 0b001
    assert local_mask(GameState(-1, g, (1, 1, 2))) == 0b111
    assert local_mask(GameState(-1, g, (0, 1, 1))) == 0
    assert local_graph(GameState(-1, g, (0, 1, 1))).is_null


@pytest.mark.parametrize("conv", sorted(CONVENTIONS))
def test_lookup_finds_every_state(conv):
    space = state_space(4, conv)
    for s in space.states:
        assert space.lookup(s.graph, s.status)[0] == s.id


@pytest.mark.parametrize("conv", sorted(CONVENTIONS))
def test_actions_lie_in_local_graph(conv):
    space = state_space(4, conv)
    for s in space.states:
        mask = local_mask(s)
        acts = space.actions(s)
        assert (len(acts) == 0) == (mask == 0)
        assert all((mask >> a) & 1 for a in acts)


def test_orbit_actions_merge_symmetric_blocks():
    space = state_space(4, "orbit")
    g = class_by_name("g_4.(1,1,1)")
    s = space.full_information_state(g)
    assert space.actions(s) == (0, 1)


def test_unknown_convention():
    with pytest.raises(ValueError):
        get_convention("bogus")
    with pytest.raises(ValueError):
        state_space(0)
