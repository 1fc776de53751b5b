"""Seeded random sites, (pre)(co)sheaves and morphisms, plus the oracle
suite the CLI exposes.

Random precosheaves are sums of representable blocks (a block anchored at W
contributes its grains to every object W maps into), which is functorial by
construction; anchoring a block at a bottom object yields constant summands.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import values
from .category import SiteSpec
from .cosheaf import Precosheaf, PrecosheafMorphism, precosheaf_from_tables
from .errors import EngineError
from .sheaf import Presheaf
from .spaces import FiniteSpace, open_site, site_points
from .towers import LevelMorphism
from .values import FINAB, FINSET, FinAbObj, finset_map


_SHAPES = {
    "point": FiniteSpace(("a",), frozenset()),
    "chain2": FiniteSpace(("a", "b"), frozenset({("a", "b")})),
    "disc2": FiniteSpace(("a", "b"), frozenset()),
    "chain3": FiniteSpace(("a", "b", "c"), frozenset({("a", "b"), ("b", "c")})),
    "vee": FiniteSpace(("a", "b", "c"), frozenset({("c", "a"), ("c", "b")})),
    "wedge": FiniteSpace(("a", "b", "c"), frozenset({("a", "c"), ("b", "c")})),
}


def random_site(rng: random.Random) -> SiteSpec:
    name = rng.choice(sorted(_SHAPES))
    policy = rng.choice(["all-irredundant", "generated"])
    return open_site(_SHAPES[name], policy)


@dataclass(frozen=True)
class Block:
    anchor: str        # object id the block is anchored at
    grains: int        # number of set elements / generator count
    torsion: int       # 0 for free / a modulus for cyclic summands (FinAb)


def _random_blocks(spec: SiteSpec, rng: random.Random, max_size: int, finab: bool) -> list[Block]:
    objs = sorted(spec.category.objects)
    blocks = []
    for _ in range(rng.randint(1, 3)):
        anchor = rng.choice(objs)
        grains = rng.randint(1, 2)
        torsion = rng.choice([0, 0, 2, 3]) if finab else 0
        blocks.append(Block(anchor, grains, torsion))
    # trim so every value stays within the size bound
    while blocks:
        worst = 0
        for u in objs:
            size = sum(b.grains for b in blocks if _reaches(spec, b.anchor, u))
            worst = max(worst, size)
        if worst <= max_size:
            break
        blocks.pop()
    if not blocks:
        blocks = [Block(objs[0], 1, 0)]
    return blocks


def _reaches(spec: SiteSpec, anchor: str, u: str) -> bool:
    return any(m.src == anchor and m.dst == u for m in spec.category.morphisms)


def _reaches_op(spec: SiteSpec, anchor: str, u: str) -> bool:
    return any(m.src == u and m.dst == anchor for m in spec.category.morphisms)


def random_finset_precosheaf(spec: SiteSpec, rng: random.Random, depth: int = 0,
                             max_size: int = 4) -> Precosheaf:
    blocks = _random_blocks(spec, rng, max_size, finab=False)
    tables = {}
    for u in spec.category.objects:
        elems = []
        for bi, b in enumerate(blocks):
            if _reaches(spec, b.anchor, u):
                elems.extend(f"b{bi}e{g}" for g in range(b.grains))
        tables[u] = tuple(elems)
    action = {}
    for m in spec.category.morphisms:
        action[m.id] = {x: x for x in tables[m.src]}
    return precosheaf_from_tables(spec, FINSET, tables, action, depth, site_points(spec))


def random_finab_precosheaf(spec: SiteSpec, rng: random.Random, depth: int = 0,
                            max_rank: int = 3) -> Precosheaf:
    blocks = _random_blocks(spec, rng, max_rank, finab=True)
    layout = {}
    tables = {}
    for u in spec.category.objects:
        active = [(bi, b) for bi, b in enumerate(blocks) if _reaches(spec, b.anchor, u)]
        layout[u] = active
        rank = sum(b.grains for _, b in active)
        cols = []
        off = 0
        for _, b in active:
            if b.torsion:
                for g in range(b.grains):
                    col = [0] * rank
                    col[off + g] = b.torsion
                    cols.append(col)
            off += b.grains
        rel = tuple(tuple(c[i] for c in cols) for i in range(rank)) if cols else ()
        tables[u] = FinAbObj(rank, rel)
    action = {}
    for m in spec.category.morphisms:
        src_active = layout[m.src]
        dst_active = layout[m.dst]
        src_rank = tables[m.src].rank
        dst_rank = tables[m.dst].rank
        rows = [[0] * src_rank for _ in range(dst_rank)]
        src_off = 0
        for bi, b in src_active:
            dst_off = 0
            for bj, c in dst_active:
                if bj == bi:
                    for g in range(b.grains):
                        rows[dst_off + g][src_off + g] = 1
                dst_off += c.grains
            src_off += b.grains
        action[m.id] = tuple(tuple(r) for r in rows)
    return precosheaf_from_tables(spec, FINAB, tables, action, depth, site_points(spec))


def random_presheaf(spec: SiteSpec, rng: random.Random, max_size: int = 4) -> Presheaf:
    """Sums of co-representable blocks: a block anchored at W is present at
    every object mapping into W; restrictions keep labels."""
    objs = sorted(spec.category.objects)
    blocks = []
    for _ in range(rng.randint(1, 3)):
        blocks.append(Block(rng.choice(objs), rng.randint(1, 2), 0))
    while blocks:
        worst = max(
            sum(b.grains for b in blocks if _reaches_op(spec, b.anchor, u)) for u in objs
        )
        if worst <= max_size:
            break
        blocks.pop()
    if not blocks:
        blocks = [Block(objs[-1], 1, 0)]
    vals = {}
    for u in objs:
        elems = []
        for bi, b in enumerate(blocks):
            if _reaches_op(spec, b.anchor, u):
                elems.extend(f"b{bi}e{g}" for g in range(b.grains))
        vals[u] = values.FinSetObj(tuple(elems))
    action = {}
    for m in spec.category.morphisms:
        # restriction from value(dst) to value(src): defined on shared blocks
        table = {}
        for x in vals[m.dst].elements:
            if x in vals[m.src].elements:
                table[x] = x
            else:
                raise EngineError("co-representable block escaped downward closure")
        action[m.id] = finset_map(vals[m.dst], vals[m.src], table)
    return Presheaf(spec, FINSET, vals, action, site_points(spec))


def _scaled_identity(a: Precosheaf, n: int, depth: int) -> PrecosheafMorphism:
    comps = {}
    for u in a.site.category.objects:
        g = a.values[u].levels[0]
        mtx = [[n if i == j else 0 for j in range(g.rank)] for i in range(g.rank)]
        f = values.finab_map(g, g, mtx)
        comps[u] = LevelMorphism.strict(a.values[u], a.values[u], (f,) * (depth + 1))
    return PrecosheafMorphism(a, a, comps)


def _block_injection(a: Precosheaf, summed: Precosheaf, depth: int) -> PrecosheafMorphism:
    comps = {}
    for u in a.site.category.objects:
        ga = a.values[u].levels[0]
        gs = summed.values[u].levels[0]
        mtx = [[1 if i == j else 0 for j in range(ga.rank)] for i in range(gs.rank)]
        f = values.finab_map(ga, gs, mtx)
        comps[u] = LevelMorphism.strict(a.values[u], summed.values[u], (f,) * (depth + 1))
    return PrecosheafMorphism(a, summed, comps)


def _block_projection(summed: Precosheaf, a: Precosheaf, depth: int) -> PrecosheafMorphism:
    comps = {}
    for u in a.site.category.objects:
        ga = a.values[u].levels[0]
        gs = summed.values[u].levels[0]
        mtx = [[1 if i == j else 0 for j in range(gs.rank)] for i in range(ga.rank)]
        f = values.finab_map(gs, ga, mtx)
        comps[u] = LevelMorphism.strict(summed.values[u], a.values[u], (f,) * (depth + 1))
    return PrecosheafMorphism(summed, a, comps)


def random_finab_morphism(spec: SiteSpec, rng: random.Random, depth: int = 0
                          ) -> PrecosheafMorphism:
    """A natural transformation of abelian block precosheaves: a scaled
    identity, a summand inclusion, or a summand projection."""
    from .cosheaf import coproduct

    a = random_finab_precosheaf(spec, rng, depth)
    kind = rng.choice(["scale", "scale", "inject", "project"])
    if kind == "scale":
        return _scaled_identity(a, rng.choice([0, 1, 2, 3, -1]), depth)
    b = random_finab_precosheaf(spec, rng, depth)
    summed = coproduct(a, b)
    if kind == "inject":
        return _block_injection(a, summed, depth)
    return _block_projection(summed, a, depth)


def oracle_suite(seed: int = 0, cases: int = 25):
    """Randomized cross-validation: fast/slow defect agreement and the plus
    construction laws on both sides, over seeded random open-set sites."""
    from .cosheaf import (check_cosheaf, cosheaf_defect, defect_agreement,
                          plus_cosheaf)
    from .category import distinct_covers, validate_site
    from .report import CheckReport
    from .sheaf import check_sheaf, plus_sheaf
    from .towers import equal_at_depth, is_iso_at_depth
    from .values import classify_map

    rng = random.Random(seed)
    failures = []
    trace = []
    for case in range(cases):
        spec = random_site(rng)
        if not validate_site(spec).passed:
            failures.append({"case": case, "failed": "site axioms"})
            continue
        a = random_finset_precosheaf(spec, rng)
        b = random_finab_precosheaf(spec, rng)
        for sample in (a, b):
            for u in spec.category.objects:
                for cover in distinct_covers(spec, u, 0):
                    if cover.has_intersections() and not defect_agreement(sample, cover):
                        failures.append({"case": case, "object": u,
                                         "failed": "fast/slow disagreement"})
        plus = plus_cosheaf(a)
        plus_report = check_cosheaf(plus.precosheaf)
        if plus_report.classification not in ("COSEPARATED", "COSHEAF"):
            failures.append({"case": case, "failed": "plus not coseparated"})
        base = check_cosheaf(a)
        if base.classification in ("COSEPARATED", "COSHEAF"):
            if plus_report.classification != "COSHEAF":
                failures.append({"case": case, "failed": "plus of coseparated not a cosheaf"})
        counit_iso = all(
            is_iso_at_depth(plus.counit.components[u]).iso for u in spec.category.objects
        )
        if counit_iso != (base.classification == "COSHEAF"):
            failures.append({"case": case, "failed": "counit-iso vs cosheaf mismatch"})
        p = random_presheaf(spec, rng)
        sp = plus_sheaf(p)
        sp_report = check_sheaf(sp.presheaf)
        if sp_report.classification not in ("SEPARATED", "SHEAF"):
            failures.append({"case": case, "failed": "sheaf plus not separated"})
        unit_iso = all(classify_map(sp.unit[u]).iso for u in spec.category.objects)
        if unit_iso != (check_sheaf(p).classification == "SHEAF"):
            failures.append({"case": case, "failed": "unit-iso vs sheaf mismatch"})
    trace.append(f"{cases} cases, {len(failures)} failures")
    return CheckReport(
        verdict="PASS" if not failures else "FAIL",
        classification="oracle suite",
        witnesses=tuple(failures[:10]),
        trace=tuple(trace),
    )
