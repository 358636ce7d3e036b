"""Experiment pipelines: dispatch a validated config to the matching module
stack, collect CSV rows, fit exponents, and render a pass/fail summary."""

from __future__ import annotations

import csv
import datetime
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..lattice import Lattice, Region
from ..algebra import (GlobalOperator, PAULI_X, PAULI_Z, ID2, identity,
                       pauli_string, single_site, total_spin, op_norm)
from ..generators import (heat_bath_ising, davies_generator,
                          pair_singlet_generator, heisenberg_hamiltonian,
                          ising_hamiltonian, detailed_balance_defect,
                          glauber_rate)
from ..states import (gibbs, tilted_pair, kt_state, raising_operator,
                      spin_order_parameters, goldstone_twist, twisted_state,
                      fluctuation_ratio)
from ..defects import (DefectSeries, fit_exponent, metastability_defect,
                       reversibility_defect, kt_reversibility_defect,
                       koma_lemma_check)
from ..dynamics import lieb_robinson_defect, survival_time
from ..glauber_mc import mc_survival_time
from .config import ExperimentConfig, ConfigError, serialize, config_hash

MAX_EXACT_SITES = 12


@dataclass
class RunRecord:
    config: ExperimentConfig
    timestamp: str
    version: str
    rows: list = field(default_factory=list)      # dict rows for CSV
    summary_lines: list = field(default_factory=list)
    exponents: dict = field(default_factory=dict)
    series: list = field(default_factory=list)    # DefectSeries objects
    passed: bool = True

    def note(self, line: str, ok: bool = None):
        if ok is not None:
            line = f"{line} {'PASS' if ok else 'FAIL'}"
            self.passed = self.passed and ok
        self.summary_lines.append(line)

    def summary(self) -> str:
        head = [f"experiment: {self.config.kind}",
                f"config-hash: {config_hash(self.config)}",
                f"version: {self.version}",
                f"timestamp: {self.timestamp}"]
        tail = [f"result: {'PASS' if self.passed else 'FAIL'}"]
        return "\n".join(head + self.summary_lines + tail) + "\n"

    def write(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        base = f"{self.config.kind}-{config_hash(self.config)}"
        with open(os.path.join(out_dir, base + ".yaml"), "w") as fh:
            fh.write(serialize(self.config))
        if self.rows:
            keys = sorted({k for row in self.rows for k in row})
            with open(os.path.join(out_dir, base + ".csv"), "w",
                      newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=keys)
                writer.writeheader()
                writer.writerows(self.rows)
        with open(os.path.join(out_dir, base + ".txt"), "w") as fh:
            fh.write(self.summary())


def run(config: ExperimentConfig) -> RunRecord:
    config.validate()
    for L in config.L_list:
        n = L ** config.d if config.kind not in ("mc-survival",) else 0
        if n > 2**MAX_EXACT_SITES or (config.kind != "mc-survival"
                                      and n > MAX_EXACT_SITES):
            raise ConfigError(
                f"L={L}, d={config.d} gives N={n} sites; exact computation "
                f"is limited to N <= {MAX_EXACT_SITES}")
    record = RunRecord(config=config,
                       timestamp=datetime.datetime.now().isoformat(
                           timespec="seconds"),
                       version=__version__)
    dispatch = {
        "db-check": _run_db_check,
        "metastability-scan": _run_metastability,
        "kt-scan": _run_kt_scan,
        "goldstone-scan": _run_goldstone,
        "lr-cone": _run_lr_cone,
        "survival": _run_survival,
        "mc-survival": _run_mc_survival,
    }
    dispatch[config.kind](config, record)
    if config.out:
        record.write(config.out)
    return record


def _rate_fn(config):
    if config.rate_function != "glauber":
        raise ConfigError(f"unknown rate function {config.rate_function!r}")
    return glauber_rate


def _run_db_check(config, record):
    for L in config.L_list:
        lattice = Lattice(config.d, L)
        liouv = heat_bath_ising(lattice, config.beta, config.J,
                                _rate_fn(config))
        omega = gibbs(ising_hamiltonian(lattice, config.J), config.beta)
        defect = detailed_balance_defect(liouv, omega, seed=config.seed)
        ok = defect <= config.tolerance
        record.rows.append(dict(model="heat-bath-ising", d=config.d, L=L,
                                N=lattice.n_sites, beta=config.beta,
                                defect_kind="detailed-balance", value=defect,
                                seed=config.seed))
        record.note(f"  L={L} defect {defect:.3e} "
                    f"(<= {config.tolerance:g})", ok)


def _run_metastability(config, record):
    meta = DefectSeries("tilted-metastability")
    rev = DefectSeries("tilted-reversibility")
    for L in config.L_list:
        lattice = Lattice(config.d, L)
        n = lattice.n_sites
        liouv = heat_bath_ising(lattice, config.beta, config.J,
                                _rate_fn(config))
        ground = gibbs(ising_hamiltonian(lattice, config.J), float("inf"))
        plus, _ = tilted_pair(ground, total_spin(lattice, "z"))
        A = single_site(lattice, 0, PAULI_X)
        B = single_site(lattice, min(1, n - 1), PAULI_Z)
        dm = metastability_defect(plus, liouv, A)
        dr = reversibility_defect(plus, liouv, A, B)
        meta.add(L, n, dm)
        rev.add(L, n, dr)
        record.rows.extend([
            dict(model="zero-T-ising-tilted", d=config.d, L=L, N=n,
                 probe_id="sx0", defect_kind="metastability", value=dm,
                 seed=config.seed),
            dict(model="zero-T-ising-tilted", d=config.d, L=L, N=n,
                 probe_id="sx0-sz1", defect_kind="reversibility", value=dr,
                 seed=config.seed)])
        record.note(f"  N={n} metastability {dm:.3e} reversibility {dr:.3e}")
    for series, name in ((meta, "metastability"), (rev, "reversibility")):
        try:
            slope, stderr, rms = fit_exponent(series)
            record.exponents[name] = slope
            record.series.append(series)
            record.note(f"  {name} slope {slope:.3f} (stderr {stderr:.3f}, "
                        f"residual {rms:.3f}) <= -0.9",
                        slope <= -0.9 and rms <= 0.1)
        except ValueError as exc:
            record.note(f"  {name} fit impossible: {exc}", False)


def _heisenberg_testbed(L, beta_gen=float("inf")):
    lattice = Lattice(1, L)
    H = heisenberg_hamiltonian(lattice)
    omega = gibbs(H, float("inf"))
    pair = spin_order_parameters(lattice)
    Oplus = raising_operator(pair)
    couplings = [single_site(lattice, x, p)
                 for x in lattice.sites()
                 for p in (PAULI_X, np.array([[0, -1j], [1j, 0]]), PAULI_Z)]
    liouv = davies_generator(H, couplings, beta_gen)
    return lattice, omega, pair, Oplus, liouv


def _run_kt_scan(config, record):
    prev_by_n = {}
    prev_delta = None
    for L in config.L_list:
        lattice, omega, pair, Oplus, liouv = _heisenberg_testbed(L)
        n = lattice.n_sites
        mu = fluctuation_ratio(omega, pair.O1, pair.o)
        vals = []
        for M in range(config.M_max + 1):
            state = kt_state(omega, Oplus, M)
            one = state.expect(identity(lattice)).real
            o2 = abs(state.expect(pair.O2))
            o1 = state.expect(pair.O1).real
            vals.append(o1 / n)
            record.rows.append(dict(model="heisenberg-multiplet", d=1, L=L,
                                    N=n, M=M, norm=one, o2=o2,
                                    o1_density=o1 / n, seed=config.seed))
            record.note(f"  N={n} M={M} norm err {abs(one - 1):.2e} "
                        f"o2 {o2:.2e} o1/N {o1 / n:.4f}",
                        abs(one - 1) <= 1e-10 and o2 <= 1e-10)
        nondec = all(vals[i + 1] >= vals[i] - 1e-12 for i in range(len(vals) - 1))
        record.note(f"  N={n} o1/N non-decreasing in M "
                    f"({', '.join(f'{v:.4f}' for v in vals)})",
                    nondec and vals[-1] > 0)
        report = koma_lemma_check(omega, Oplus, Region(lattice, [0]),
                                  min(config.M_max, 2) or 1, mu, pair.o)
        if report.hypotheses_hold():
            record.note(f"  N={n} lemma hypotheses hold; inequalities",
                        report.all_inequalities_hold())
        else:
            record.note(f"  N={n} lemma hypotheses violated "
                        f"(size_ok={report.hypothesis_size_ok} "
                        f"m_ok={report.hypothesis_m_ok}); observed "
                        f"inequalities={report.all_inequalities_hold()}")
        A = single_site(lattice, 0, (ID2 + PAULI_Z) / 2)
        B = single_site(lattice, 1, (ID2 + PAULI_X) / 2)
        delta = kt_reversibility_defect(omega, liouv, Oplus, 1, 1, A, B)
        record.rows.append(dict(model="heisenberg-multiplet", d=1, L=L, N=n,
                                defect_kind="kt-reversibility-11",
                                value=delta, seed=config.seed))
        if prev_delta is not None:
            record.note(f"  N={n} Delta(1,1) {delta:.4e} < previous "
                        f"{prev_delta:.4e}", delta < prev_delta)
        else:
            record.note(f"  N={n} Delta(1,1) {delta:.4e}")
        prev_delta = delta


def _run_goldstone(config, record):
    series = DefectSeries("goldstone")
    for L in config.L_list:
        lattice = Lattice(1, L)
        liouv = pair_singlet_generator(lattice)
        omega = gibbs(heisenberg_hamiltonian(lattice), float("inf"))
        Oplus = raising_operator(spin_order_parameters(lattice))
        state = kt_state(omega, Oplus, min(config.M_max, 2))
        U = goldstone_twist(lattice)
        twisted = twisted_state(state, U)
        A = single_site(lattice, 0, PAULI_X)
        la = liouv.apply_matrix(A.matrix)
        defect = abs(twisted.expect_matrix(la) - state.expect_matrix(la))
        series.add(L, lattice.n_sites, defect)
        winding = 0.0
        angles = []
        for x in lattice.sites():
            sx = twisted.expect(single_site(lattice, x, PAULI_X)).real
            sy = twisted.expect(
                single_site(lattice, x, np.array([[0, -1j], [1j, 0]]))).real
            bx = state.expect(single_site(lattice, x, PAULI_X)).real
            by = state.expect(
                single_site(lattice, x, np.array([[0, -1j], [1j, 0]]))).real
            angles.append(math.atan2(sy, sx))
            record.rows.append(dict(model="pair-singlet", L=L,
                                    N=lattice.n_sites, site=x, sx=sx, sy=sy,
                                    base_sx=bx, base_sy=by,
                                    seed=config.seed))
        unwrapped = np.unwrap(angles)
        winding = (unwrapped[-1] - unwrapped[0]) / (2 * np.pi) \
            * L / max(L - 1, 1)
        record.note(f"  L={L} defect {defect:.4e} winding {winding:+.2f}",
                    abs(abs(winding) - 1.0) <= 0.1)
    slope, stderr, rms = fit_exponent(series)
    record.exponents["goldstone"] = slope
    record.series.append(series)
    record.note(f"  slope {slope:.3f} <= -0.8", slope <= -0.8)


def _run_lr_cone(config, record):
    L = config.L_list[-1]
    lattice = Lattice(config.d, L)
    liouv = heat_bath_ising(lattice, config.beta, config.J, _rate_fn(config))
    A = single_site(lattice, 0, PAULI_Z)
    prev = None
    ok_all = True
    for v in config.v_tildes:
        defect = lieb_robinson_defect(liouv, A, config.t, v)
        record.rows.append(dict(model="heat-bath-ising", d=config.d, L=L,
                                N=lattice.n_sites, v_tilde=v, t=config.t,
                                defect_kind="lr-cone", value=defect,
                                seed=config.seed))
        line = f"  v~={v} defect {defect:.4e}"
        if prev is not None:
            ok = defect < prev
            ok_all = ok_all and ok
            record.note(line + " (decreasing)", ok)
        else:
            record.note(line)
        prev = defect


def _run_survival(config, record):
    times = []
    for L in config.L_list:
        lattice = Lattice(config.d, L)
        n = lattice.n_sites
        liouv = heat_bath_ising(lattice, config.beta, config.J,
                                _rate_fn(config))
        ground = gibbs(ising_hamiltonian(lattice, config.J), float("inf"))
        plus, _ = tilted_pair(ground, total_spin(lattice, "z"))
        A = single_site(lattice, 0, PAULI_Z)
        t = survival_time(liouv, plus, A, config.delta_a, config.t_max)
        times.append((L, t))
        record.rows.append(dict(model="zero-T-ising-tilted", d=config.d, L=L,
                                N=n, delta_a=config.delta_a,
                                t_eq="exceeded" if math.isinf(t) else t,
                                seed=config.seed))
        record.note(f"  L={L} t_eq "
                    f"{'exceeded' if math.isinf(t) else f'{t:.4f}'}")
    finite = [(L, t) for L, t in times if not math.isinf(t)]
    if len(finite) >= 2:
        L0, t0 = finite[0]
        c = t0 / L0 ** (config.d / (config.d + 1))
        ok = all(t >= c * L ** (config.d / (config.d + 1)) - 1e-12
                 for L, t in finite)
        record.note(f"  t_eq >= {c:.4f} * L^{config.d}/{config.d + 1} "
                    f"at all sizes", ok)


def _run_mc_survival(config, record):
    medians = []
    for L in config.L_list:
        stats = mc_survival_time(config.d, L, config.beta, config.delta_m,
                                 config.trials, config.seed,
                                 sweep_cap=config.sweep_cap, J=config.J)
        med = stats.median()
        q1, q3 = stats.quartiles()
        medians.append((L, med, stats.n_censored))
        for i, s in enumerate(stats.sweeps):
            record.rows.append(dict(d=config.d, L=L, beta=config.beta,
                                    delta_m=config.delta_m, trial=i,
                                    sweeps_or_censored=(
                                        "censored" if math.isinf(s) else s),
                                    seed=config.seed))
        record.note(f"  L={L} median {med:.1f} sweeps "
                    f"(IQR {q1:.1f}-{q3:.1f}, censored {stats.n_censored}"
                    f"/{config.trials})")
    exponent = config.d / (config.d + 1)
    L0, med0, _ = medians[0]
    c = med0 / L0**exponent
    ok = all(med >= c * L**exponent - 1e-9 for L, med, _ in medians)
    record.note(f"  median >= {c:.3f} * L^{exponent:.3f} at all L", ok)
    record.note(f"  median(L={medians[-1][0]}) > median(L={L0})",
                medians[-1][1] > med0)


# ---------------------------------------------------------------------------
# cross-run reporting

def report(records: list) -> str:
    """Merge defect series across runs of the same experiment kind and emit
    a plain-text table with refitted exponents plus log-log data columns."""
    if not records:
        raise ValueError("no run records to report")
    kinds = {r.config.kind for r in records}
    if len(kinds) > 1:
        raise ValueError(f"refusing to mix experiment kinds: {sorted(kinds)}")
    merged = {}
    for rec in records:
        for series in rec.series:
            target = merged.setdefault(series.label,
                                       DefectSeries(series.label))
            target.entries.extend(series.entries)
    lines = [f"kind: {records[0].config.kind}",
             f"runs: {len(records)}"]
    for label, series in merged.items():
        series.entries.sort(key=lambda e: e[1])
        try:
            slope, stderr, rms = fit_exponent(series)
            lines.append(f"[{label}] slope {slope:.4f} stderr {stderr:.4f} "
                         f"residual {rms:.4f}")
        except ValueError as exc:
            lines.append(f"[{label}] no fit: {exc}")
        lines.append("log10(N) log10(defect)")
        for (_, n, v, _) in series.positive_entries():
            lines.append(f"{math.log10(n):.6f} {math.log10(v):.6f}")
    for rec in records:
        lines.extend(rec.summary_lines)
    return "\n".join(lines) + "\n"
