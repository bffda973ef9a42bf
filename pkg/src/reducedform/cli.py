"""Command-line front end.

    reducedform --instance FILE --cmd realize [--format structured] [--out PATH]

Exit status: 0 pass, 1 property violated (certificate in the report),
2 input error, 3 cap exceeded.
"""
from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass
from typing import Optional

from . import io
from .border import DEFAULT_MAX_TSTAR, PriorityOrder, border_check, greedy_allocation, is_submodular
from .core import CapExceeded, InstanceError, interim_of
from .polytopes import MatchingPolytope, Polymatroid

EXIT_PASS, EXIT_VIOLATED, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3
COMMANDS = ("interim", "border", "bm", "greedy", "realize", "half", "da", "sd", "fuzz")


@dataclass
class RunConfig:
    command: str
    instance: Optional[str] = None
    seed: int = 0
    max_states: int = 10_000
    max_tstar: int = DEFAULT_MAX_TSTAR
    format: str = "text"
    out: Optional[str] = None
    fuzz_count: int = 5

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.max_states <= 0 or self.max_tstar <= 0 or self.fuzz_count <= 0:
            raise ValueError("caps must be positive")


def _need(doc, field, cmd):
    if field not in doc:
        raise io.ParseError(f"$.{field}", f"required by '{cmd}'")
    return doc[field]


def _poly(doc, inst):
    if inst.kind == "matching":
        return MatchingPolytope.for_instance(inst)
    return Polymatroid(io.constraint_from_dict(inst, doc.get("constraint")))


def _priority(doc, inst):
    if "priority" in doc:
        return io.priority_from_list(inst, doc["priority"])
    return PriorityOrder.identity(inst)


def cmd_interim(doc, inst, cfg):
    q = io.allocation_from_list(inst, _need(doc, "allocation", "interim"))
    poly = _poly(doc, inst)
    for t in inst.states:
        if not poly.contains(t, q.at(t)):
            raise io.ParseError("$.allocation", f"allocation infeasible in state {list(t)!r}")
    return True, {"interim": io.interim_to_list(interim_of(q, inst))}


def cmd_border(doc, inst, cfg):
    if inst.kind != "general":
        raise io.ParseError("$.kind", "'border' needs a general instance")
    Q = io.interim_from_list(inst, _need(doc, "interim", "border"))
    C = io.constraint_from_dict(inst, doc.get("constraint"))
    sub = all(is_submodular(C, t) for t in inst.states)
    v = border_check(Q, inst, C, max_tstar=cfg.max_tstar)
    rep = {"border_holds": v.ok, "submodular": sub}
    if not v.ok:
        rep["violating_set"] = sorted(v.witness, key=inst.key_index.get)
        rep["lhs"], rep["rhs"] = v.info["lhs"], v.info["rhs"]
    return v.ok, rep


def cmd_bm(doc, inst, cfg):
    from .matching import bm_check
    if inst.kind != "matching":
        raise io.ParseError("$.kind", "'bm' needs a matching instance")
    Q = io.interim_from_list(inst, _need(doc, "interim", "bm"))
    v = bm_check(Q, inst, max_tstar=cfg.max_tstar)
    rep = {"bm_holds": v.ok}
    if not v.ok:
        rep["violating_set"] = sorted(v.witness, key=inst.key_index.get)
        rep["lhs"], rep["rhs"] = v.info["lhs"], v.info["rhs"]
    return v.ok, rep


def cmd_greedy(doc, inst, cfg):
    R = _priority(doc, inst)
    k = doc.get("truncation")
    if inst.kind == "matching":
        from .matching import greedy_matching
        q, Q = greedy_matching(R, inst, k)
    else:
        q, Q = greedy_allocation(inst, io.constraint_from_dict(inst, doc.get("constraint")), R, k)
    return True, {"priority": list(R.keys), "allocation": io.allocation_to_list(q),
                  "interim": io.interim_to_list(Q)}


def cmd_realize(doc, inst, cfg):
    from .lp import realizable
    Q = io.interim_from_list(inst, _need(doc, "interim", "realize"))
    r = realizable(Q, inst, _poly(doc, inst))
    if r.feasible:
        return True, {"realizable": True, "allocation": io.allocation_to_list(r.allocation)}
    rep = {"realizable": False, "farkas_multipliers": list(r.multipliers)}
    if r.separator is not None:
        rep.update(separator=[[k, v] for k, v in r.separator.items()],
                   separator_value=r.separator_value, separator_bound=r.separator_bound)
    return False, rep


def cmd_half(doc, inst, cfg):
    from .matching import half_char_verify, tighten
    if inst.kind != "matching":
        raise io.ParseError("$.kind", "'half' needs a matching instance")
    from .matching import bm_check
    Q = io.interim_from_list(inst, _need(doc, "interim", "half"))
    bm = bm_check(Q, inst, max_tstar=cfg.max_tstar)
    v = half_char_verify(Q, inst, "realizable_half")
    rep = {"bm_holds": bm.ok, "half_realizable": v.ok}
    rep["allocation" if v.ok else "separator"] = (
        io.allocation_to_list(v.witness) if v.ok else [[k, x] for k, x in (v.witness or {}).items()])
    f = half_char_verify(Q, inst, "fosd_all_orders", seed=cfg.seed)
    rep["fosd_all_orders"] = f.ok
    tr = tighten(Q, _priority(doc, inst), inst)
    rep["tighten"] = {"alpha": tr.alpha, "ell": tr.ell, "interim": io.interim_to_list(tr.Qhat)}
    return bm.ok and v.ok and f.ok, rep


def cmd_da(doc, inst, cfg):
    from .da import (PrincipalPriority, da_guarantee_check, dsic_check, greedy_equals_da,
                     is_item_ranking_consistent, is_welfarist)
    if inst.kind != "matching":
        raise io.ParseError("$.kind", "'da' needs a matching instance")
    p = PrincipalPriority.from_order(_priority(doc, inst), inst)
    w = is_welfarist(p, inst)
    irc = is_item_ranking_consistent(p, inst)
    rep = {"welfarist": w.ok, "item_ranking_consistent": irc.ok,
           "blocked": [[k, p.is_blocked(k)] for k in p.keys]}
    ok = w.ok and irc.ok
    if not w.ok:
        rep["welfarist_witness"] = w.witness
    if irc.ok:
        rep["item_rankings"] = {str(n): list(r) for n, r in irc.info["rankings"].items()}
    else:
        rep["irc_witness"] = irc.witness
    if ok:
        g = greedy_equals_da(p, inst)
        rep["greedy_equals_da"] = g.ok
        if not g.ok:
            rep["profile"] = g.witness
        ok = ok and g.ok
    d = dsic_check(p, inst)
    rep["dsic"] = d.ok
    ok = ok and d.ok
    if "objective" in doc:
        obj = io.objective_from_dict(inst, doc["objective"])
        g = da_guarantee_check(obj, p, inst)
        rep["guarantee"] = {"holds": g.ok, "ratio": g.witness, "value": g.info["value"],
                            "benchmark": g.info["benchmark"]}
        ok = ok and g.ok
    return ok, rep


def cmd_sd(doc, inst, cfg):
    from .cardinal import (design_order, greedy_design_outcome, ic_check, is_type_specific_sd,
                           payments_for, revenue_2approx_check)
    space = io.cardinal_from_dict(_need(doc, "cardinal", "sd"))
    if not space.is_regular():
        raise io.ParseError("$.cardinal", "virtual values are not increasing in the vertical type")
    base = doc["cardinal"].get("base_priority")
    d = design_order(space, base)
    out = lambda t: greedy_design_outcome(d, space, t)
    sd = is_type_specific_sd(out, space, common_only=True)
    sd_all = is_type_specific_sd(out, space, common_only=False)
    pk = payments_for(out, space, "known_h")
    ick = ic_check(out, pk, space, "known_h")
    r = revenue_2approx_check(space, base)
    rep = {"design_order": [[k, space.score(k)] for k in d.positive()],
           "sd_common_rankings": sd.ok, "sd_all_profiles": sd_all.ok,
           "known_h_dsic": ick.ok, "revenue_ratio": r.witness,
           "welfare_ratio": r.info["welfare_ratio"],
           "known_h_payments": [[t, [pk(t, k) for k in range(len(space.labels))]] for t in space.instance().states]}
    if not ick.ok:
        rep["deviation"] = ick.witness
    ok = sd.ok and ick.ok and r.ok
    if space.is_independent() and space.uniform_horizontals():
        pu = payments_for(out, space, "unknown_h")
        icu = ic_check(out, pu, space, "unknown_h")
        rep.update(unknown_h_payments_invariant=pu.h_invariant, unknown_h_bic=icu.ok)
        if not icu.ok:
            rep["unknown_h_deviation"] = icu.witness
        ok = ok and pu.h_invariant and icu.ok
    return ok, rep


def cmd_fuzz(doc, inst, cfg):
    from . import generators as gen
    from .lp import realizable
    from .matching import bm_check, halfbound_check
    rng = random.Random(cfg.seed)
    counts = {"border_vs_lp": 0, "bm_necessity": 0, "halfbound": 0}
    failures = []
    for _ in range(cfg.fuzz_count):
        g = gen.random_general_instance(rng, rng.randint(2, 3), 2)
        C = gen.random_submodular(rng, g)
        for Q in gen.random_interims(rng, g, Polymatroid(C), 10):
            if bool(border_check(Q, g, C)) != realizable(Q, g, Polymatroid(C)).feasible:
                failures.append(["border_vs_lp", io.interim_to_list(Q)])
            counts["border_vs_lp"] += 1
        m = gen.random_matching_instance(rng, rng.randint(2, 3), rng.randint(2, 3), 2)
        for _ in range(10):
            Q = interim_of(gen.random_feasible_rule(rng, m), m)
            if not bm_check(Q, m):
                failures.append(["bm_necessity", io.interim_to_list(Q)])
            counts["bm_necessity"] += 1
        for _ in range(20):
            rho, a = gen.random_halfbound_case(rng)
            if not halfbound_check(rho, a):
                failures.append(["halfbound", sorted(rho), sorted(a)])
            counts["halfbound"] += 1
    return not failures, {"checked": counts, "failures": failures}


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute one command; returns the exit status and the report."""
    report = {"command": cfg.command, "seed": cfg.seed}
    try:
        if cfg.command == "fuzz" and cfg.instance is None:
            doc, inst = {}, None
        else:
            if cfg.instance is None:
                raise io.ParseError("--instance", "required")
            doc = io.load(cfg.instance)
            inst = io.instance_from_dict(doc, max_states=cfg.max_states)
        ok, body = HANDLERS[cfg.command](doc, inst, cfg)
    except CapExceeded as e:
        report.update(status="cap_exceeded", error=str(e))
        return EXIT_CAP, report
    except (InstanceError, ValueError, KeyError, TypeError, OSError) as e:
        report.update(status="input_error", error=f"{type(e).__name__}: {e}")
        return EXIT_INPUT, report
    report.update(body)
    report["status"] = "pass" if ok else "violated"
    return (EXIT_PASS if ok else EXIT_VIOLATED), report


def render(report: dict, fmt: str) -> str:
    if fmt == "structured":
        return io.dumps(report)
    import json
    enc = io.encode(report)
    lines = []
    for k in sorted(enc):
        v = enc[k]
        lines.append(f"{k}: {v if isinstance(v, str) else json.dumps(v, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def parse_args(argv=None) -> RunConfig:
    ap = argparse.ArgumentParser(prog="reducedform", description=__doc__.splitlines()[0])
    ap.add_argument("--instance")
    ap.add_argument("--cmd", required=True, choices=COMMANDS)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-states", type=int, default=10_000)
    ap.add_argument("--max-tstar", type=int, default=DEFAULT_MAX_TSTAR)
    ap.add_argument("--format", choices=("text", "structured"), default="text")
    ap.add_argument("--out")
    ap.add_argument("--fuzz-count", type=int, default=5)
    a = ap.parse_args(argv)
    return RunConfig(a.cmd, a.instance, a.seed, a.max_states, a.max_tstar, a.format, a.out, a.fuzz_count)


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    code, report = run(cfg)
    text = render(report, cfg.format)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
