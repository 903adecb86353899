# orchestrators_master.py
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from config_settings import settings
from report_service import write_reports
from services_domination import DominationMatrix, Evidence
from services_encoder import domination_matrix, export_bundle, run_encoder, verify_properties
from services_lattice import STANDARD_LATTICES, is_order_isomorphic, parse_lattice
from services_lorentz import fundamental_table, lp_dominates_lorentz, powerset_diagram, weights_from_fundamental
from services_orlicz import OrliczParams
from services_pwl import check_submultiplicative, identity_pwl, pwl_from_csv_text
from services_sm_calculus import (
    Lp,
    Orlicz,
    classify_lp_sum,
    estimate_domination,
    find_gap_witness,
    lp_chain_norm,
    norm_from_spec,
    weighted_sum_combo,
)
from services_submult import (
    build_incomparable_family,
    extend_fast_trace,
    extend_slow,
    extend_slow_to,
    save_family,
    verify_family,
)
from utils_errors import InvariantError, ParameterError
from utils_helpers import decimal_to_int, format_rational, parse_rational, read_json, write_json
from utils_logger import get_logger

logger = get_logger("orchestrator")


class RunConfig(BaseModel):
    command: str
    out: str = Field(default_factory=lambda: settings.output_dir)
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)
    seed: int = Field(default_factory=lambda: settings.sample_seed)
    tau: str = Field(default_factory=lambda: settings.tau)
    r: str = Field(default_factory=lambda: settings.r)
    p: str = Field(default_factory=lambda: settings.p)
    depth: int = Field(default=6, ge=1)
    inputs: Dict[str, Any] = {}


@dataclass
class CommandResult:
    command: str
    ok: bool
    payload: Dict[str, Any]
    files: List[Path] = field(default_factory=list)


class MasterOrchestrator:
    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out)
        self.threads = config.threads
        self.seed = config.seed

    def run(self) -> CommandResult:
        handler = getattr(self, f"cmd_{self.config.command}", None)
        if handler is None:
            raise ParameterError(f"unknown command {self.config.command!r}")
        logger.info(f"running {self.config.command} (threads={self.threads}, seed={self.seed})")
        result = handler(**self.config.inputs)
        result.payload["ok"] = result.ok
        result.files.extend(write_reports(self.out, result.command, result.payload))
        logger.info(f"{result.command}: {'ok' if result.ok else 'verification failed'}")
        return result

    def params(self) -> OrliczParams:
        return OrliczParams.validated(self.config.tau, self.config.r, self.config.p)

    # ---------------------------
    # submultiplicative extensions
    # ---------------------------
    def cmd_extend(self, input: Optional[str] = None, slow_eps=None, slow_to=None, eps=None, fast_to=None, grid_points: Optional[int] = None):
        f = pwl_from_csv_text(Path(input).read_text(encoding="utf-8")) if input else identity_pwl()
        start_value = f.final_value
        steps: List[Dict] = []
        if slow_eps is not None:
            f = extend_slow(f, parse_rational(slow_eps))
            steps.append({"op": "slow", "eps": format_rational(parse_rational(slow_eps))})
        if slow_to is not None:
            if eps is None:
                raise ParameterError("--slow-to needs --eps")
            before = f.final_value
            f = extend_slow_to(f, parse_rational(slow_to), parse_rational(eps))
            growth = f.final_value - before
            steps.append({"op": "slow_to", "N0": format_rational(parse_rational(slow_to)), "growth": format_rational(growth)})
            if not growth < parse_rational(eps):
                raise InvariantError("slow extension grew by eps or more")
        if fast_to is not None:
            trace = extend_fast_trace(f, parse_rational(fast_to))
            f = trace[-1].function
            steps.append({"op": "fast_to", "M": format_rational(parse_rational(fast_to)), "steps": [s.to_dict() for s in trace]})
        check = check_submultiplicative(f, grid_points=grid_points, threads=self.threads)
        self.out.mkdir(parents=True, exist_ok=True)
        csv_path = self.out / "extended.csv"
        csv_path.write_text(f.to_csv_text(), encoding="utf-8")
        payload = {
            "start_value": format_rational(start_value),
            "domain_end_bits": f.domain_end.numerator.bit_length() - f.domain_end.denominator.bit_length(),
            "final_value": format_rational(f.final_value),
            "breakpoints": len(f.breakpoints),
            "steps": steps,
            "submultiplicative": check.to_dict(),
        }
        return CommandResult("extend", check.ok, payload, [csv_path])

    def cmd_incomparable(self, count: int = 2, requests: int = 1, verify: bool = False):
        state = build_incomparable_family(count, requests, verify=verify)
        files = save_family(state, self.out / "family")
        report = verify_family(state)
        pairs = []
        # i is not dominated by j iff some request with A containing j but not i exists
        for i, j in combinations(range(1, count + 1), 2):
            i_not_below = any(j in rec.A and i not in rec.A for rec in state.request_log)
            j_not_below = any(i in rec.A and j not in rec.A for rec in state.request_log)
            pairs.append({"pair": [i, j], "incomparable": i_not_below and j_not_below})
        ok = report.ok and all(p["incomparable"] for p in pairs)
        payload = {
            "count": count,
            "requests": len(state.request_log),
            "log": [rec.to_entry().model_dump() for rec in state.request_log],
            "verification": report.to_dict(),
            "pairs": pairs,
        }
        return CommandResult("incomparable", ok, payload, files)

    # ---------------------------
    # power-set diagrams
    # ---------------------------
    def cmd_powerset(self, n: int = 2, p: str = "1", threshold: int = 1, requests: Optional[int] = None):
        family = build_incomparable_family(n, requests or threshold)
        try:
            dm = powerset_diagram(family, n, parse_rational(p), threshold)
        except InvariantError as e:
            return CommandResult("powerset", False, {"n": n, "p": p, "error": str(e)})
        horizon = decimal_to_int(dm.metadata["horizon"])
        seqs = [weights_from_fundamental(f, horizon, parse_rational(p)) for f in family.functions[:n]]
        self.out.mkdir(parents=True, exist_ok=True)
        table_path = self.out / "fundamental.csv"
        ms = sorted({1, 2} | {int(rec.witness_n) for rec in family.request_log})
        table_path.write_text(fundamental_table(seqs, ms), encoding="utf-8")
        ok = bool(dm.metadata["order_isomorphic"])
        payload = {"n": n, "p": p, "matrix": dm.to_dict(), "order_isomorphic": ok}
        if parse_rational(p) > 1:
            rng = np.random.default_rng(self.seed)
            vectors = [rng.uniform(-1.0, 1.0, int(rng.integers(1, 40))) for _ in range(settings.random_samples)]
            below = all(lp_dominates_lorentz(ws, v) for ws in seqs for v in vectors)
            payload["lorentz_below_lp"] = below
            ok &= below
        return CommandResult("powerset", ok, payload, [table_path])

    # ---------------------------
    # lattice encoding
    # ---------------------------
    def load_lattice(self, lattice: Optional[str] = None, lattice_name: Optional[str] = None):
        if lattice:
            return parse_lattice(read_json(lattice))
        if lattice_name not in STANDARD_LATTICES:
            raise ParameterError(f"unknown lattice {lattice_name!r}; choose from {sorted(STANDARD_LATTICES)}")
        return STANDARD_LATTICES[lattice_name]()

    def cmd_encode(self, lattice: Optional[str] = None, lattice_name: Optional[str] = "m3"):
        L = self.load_lattice(lattice, lattice_name)
        state = run_encoder(L, self.params(), self.config.depth)
        report = verify_properties(state, threads=self.threads)
        dm = domination_matrix(state)
        iso, bad = is_order_isomorphic(L, dm)
        bundle_path = write_json(self.out / "encoder_bundle.json", export_bundle(state))
        payload = {
            "lattice": L.to_document(),
            "params": state.params.to_dict(),
            "depth": self.config.depth,
            "requests": len(state.request_log),
            "properties": report.to_dict(),
            "order_isomorphic": iso,
            "counterexample": None if bad is None else [L.names[bad[0]], L.names[bad[1]]],
            "matrix": dm.to_dict(),
        }
        return CommandResult("encode", report.ok and iso, payload, [bundle_path])

    # ---------------------------
    # norm evaluation
    # ---------------------------
    def cmd_norm(self, spec: str, vectors: str):
        norm = norm_from_spec(read_json(spec))
        rows = read_json(vectors)
        if not isinstance(rows, list) or not all(isinstance(v, list) for v in rows):
            raise ParameterError("vectors file must hold a list of lists")
        values = []
        for v in rows:
            value = norm.evaluate(v)
            residual = None
            if isinstance(norm, Orlicz):
                mags = np.abs(np.asarray(v, dtype=float))
                mags = mags[mags > 0]
                residual = float(abs(np.sum(norm.function.eval_many(np.minimum(mags / value, 1.0))) - 1.0))
            values.append({"vector": v, "value": value, "residual": residual})
            print(f"{norm.label}\t{value:.12g}\t{'' if residual is None else f'{residual:.3e}'}")
        return CommandResult("norm", True, {"norm": norm.label, "values": values})

    # ---------------------------
    # l_p-sum chains
    # ---------------------------
    def cmd_chain(self, p_list: Sequence[float] = (2, 2.25, 2.5, 2.75, 3), samples: int = 50):
        p_list = [float(x) for x in p_list]
        if p_list[0] != 2 or any(not 2 <= q <= 3 for q in p_list):
            raise ParameterError("p-list must start at 2 and stay within [2, 3]")
        rng = np.random.default_rng(self.seed)
        vectors = [rng.standard_normal(int(rng.integers(1, 40))) for _ in range(samples)]
        lps = [Lp(q) for q in p_list]
        supports = []
        ok = True
        for size in range(1, len(p_list) + 1):
            for support in combinations(range(len(p_list)), size):
                c = [size ** (-1.0 / p_list[0]) if b in support else 0.0 for b in range(len(p_list))]
                cls = classify_lp_sum(c, p_list)
                combined = lp_chain_norm(c, p_list)
                sandwich = all(
                    cls.lower * lps[cls.index](v) <= combined(v) * (1 + 1e-12)
                    and combined(v) <= lps[cls.index](v) * (1 + 1e-12)
                    for v in vectors
                )
                good = cls.index == min(support) and sandwich
                ok &= good
                supports.append({"support": list(support), **cls.to_dict(), "sandwich": sandwich})

        dm = DominationMatrix([n.label for n in lps])
        blocks = [1 << k for k in range(0, 4097, 64)]
        for i, a in enumerate(lps):
            for j, b in enumerate(lps):
                est = estimate_domination(a, b, cap=settings.domination_cap, seed=self.seed, block_lengths=blocks)
                if est.dominated:
                    dm.record(i, j, Evidence(constant=est.constant, note="sampled maximum"))
                else:
                    dm.record(i, j, Evidence(witness_m=decimal_to_int(est.witness["m"]) if est.witness.get("kind") == "block" else None, ratio=est.ratio))
        reversed_chain = dm.relation_matches(lambda i, j: i >= j) is None
        ok &= reversed_chain

        # a norm that separates the tail from every finite head, and an upper bound for all
        scenario = []
        for k in range(1, len(lps)):
            w = find_gap_witness(lps, range(k + 1, len(lps) + 1), threshold=2)
            scenario.append({"F": list(range(k + 1, len(lps) + 1)), "witness": None if w is None else w.to_dict()})
        upper = weighted_sum_combo([Fraction(2) ** (n + 1) for n in range(len(lps))], lps)
        contract = all(lps[n](v) <= float(upper.C[n]) * upper(v) * (1 + 1e-12) for n in range(len(lps)) for v in vectors)
        ok &= contract
        payload = {
            "p_list": p_list,
            "supports": supports,
            "matrix": dm.to_dict(),
            "reversed_chain": reversed_chain,
            "gap_scenario": scenario,
            "upper_bound_contract": contract,
        }
        return CommandResult("chain", ok, payload)
