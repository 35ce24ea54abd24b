"""Config-driven experiment pipelines and their statistics.

Every experiment consumes a JSON-compatible config, runs replicas in
deterministic chunks (workers pick up whole chunks, results merge in
chunk order, so parallel and serial runs write identical bodies), and
emits: per-replica rows (JSONL), a stats CSV, a summary JSON and
histogram CSVs, all stamped with the config hash and every seed.
Completed runs are recognized by their hash and skipped.

Experiments: lln, universality, dephasing, concentration, spde-compare,
local-fluct, degree-renorm.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import initcond
from .dynamics import (
    SimConfig,
    order_parameter_of_phases,
    simulate_ensemble,
    simulate_ensemble_multigraph,
)
from .graph import gen_erdos_renyi, gen_sbm
from .kernels import kernel_from_config
from .limits import (
    FPTrajectory,
    InitialLawSpec,
    NoiseModel,
    sample_initial,
    solve_fokker_planck,
    solve_limit_eta,
)
from .measures import (
    TWO_PI,
    AtomicMeasure,
    empirical_global,
    empirical_local,
    uniform_field,
    w1_circle,
)
from .rng import EXPERIMENT, derive_seed, stream

PACKAGE_VERSION = "0.1.0"


class ConfigError(ValueError):
    pass


EXPERIMENTS = ("lln", "universality", "dephasing", "concentration",
               "spde-compare", "local-fluct", "degree-renorm")

_SCHEMA = {
    "experiment": (str, True),
    "seed": (int, True),
    "replicas": (int, False),
    "workers": (int, False),
    "out": (str, False),
    "graph": (dict, False),
    "kernel": (dict, False),
    "init": (dict, False),
    "sim": (dict, False),
    "params": (dict, False),
}


def validate_config(cfg: dict) -> dict:
    """Schema check with defaults filled in; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key in cfg:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    for key, (typ, required) in _SCHEMA.items():
        if key in cfg and not isinstance(cfg[key], typ):
            raise ConfigError(f"config key {key!r} must be {typ.__name__}")
        if required and key not in cfg:
            raise ConfigError(f"missing required config key {key!r}")
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg['experiment']!r}; "
                          f"pick one of {', '.join(EXPERIMENTS)}")
    out = {
        "replicas": 50,
        "workers": 1,
        "out": "results",
        "graph": {"n": 200, "p": 0.5},
        "kernel": {"type": "kuramoto", "K": 2.0},
        "init": {"kind": "iid_uniform"},
        "sim": {},
        "params": {},
    }
    out.update(cfg)
    sim_defaults = {"dt": 1e-3, "t_final": 1.0, "dtype": "float64",
                    "replica_chunk": 250, "renorm": "expected"}
    sim_defaults.update(out["sim"])
    out["sim"] = sim_defaults
    return out


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

@dataclass
class StatTable:
    rows: list
    summary: dict
    histograms: dict

    def write(self, out_dir: str, cfg: dict) -> None:
        os.makedirs(out_dir, exist_ok=True)
        meta = {"config": cfg, "config_hash": config_hash(cfg),
                "version": PACKAGE_VERSION}
        with open(os.path.join(out_dir, "rows.jsonl"), "w") as fh:
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
            for row in self.rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
        keys = sorted({k for row in self.rows for k in row})
        with open(os.path.join(out_dir, "stats.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(self.rows)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump({**meta, "summary": self.summary}, fh, indent=2, sort_keys=True)
        for name, hist in self.histograms.items():
            with open(os.path.join(out_dir, f"hist_{name}.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["left_edge", "right_edge", "count"])
                edges, counts = hist["edges"], hist["counts"]
                for i, c in enumerate(counts):
                    writer.writerow([edges[i], edges[i + 1], c])
        plot_path = os.path.join(out_dir, "plot_histograms.py")
        with open(plot_path, "w") as fh:
            fh.write(_PLOT_SCRIPT)


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Render the sibling hist_*.csv files (requires matplotlib).
import csv, glob, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
for path in sorted(glob.glob(os.path.join(here, "hist_*.csv"))):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    lefts = [float(r["left_edge"]) for r in rows]
    rights = [float(r["right_edge"]) for r in rows]
    counts = [float(r["count"]) for r in rows]
    widths = [r - l for l, r in zip(lefts, rights)]
    plt.bar(lefts, counts, width=widths, align="edge", alpha=0.5,
            label=os.path.basename(path)[5:-4])
plt.legend()
plt.savefig(os.path.join(here, "histograms.png"), dpi=150)
print("wrote histograms.png")
"""


def histogram_spec(samples: np.ndarray, bins=None) -> dict:
    """Freedman-Diaconis binning by default."""
    x = np.asarray(samples, dtype=float)
    if bins is None:
        iqr = np.subtract(*np.percentile(x, [75, 25]))
        width = 2.0 * iqr / len(x) ** (1.0 / 3.0)
        if width <= 0:
            bins = 10
        else:
            bins = max(1, int(np.ceil((x.max() - x.min()) / width)))
    counts, edges = np.histogram(x, bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def summarize(samples: np.ndarray) -> dict:
    x = np.asarray(samples, dtype=float)
    return {
        "count": int(x.size),
        "mean": float(x.mean()),
        "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "se": float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0,
        "q05": float(np.percentile(x, 5)),
        "q50": float(np.percentile(x, 50)),
        "q95": float(np.percentile(x, 95)),
    }


# ---------------------------------------------------------------------------
# shared statistics
# ---------------------------------------------------------------------------

def ks_two_sample(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        raise ValueError("KS test needs nonempty samples")
    allv = np.concatenate([a, b])
    Fa = np.searchsorted(a, allv, side="right") / m
    Fb = np.searchsorted(b, allv, side="right") / n
    D = float(np.abs(Fa - Fb).max())
    ne = m * n / (m + n)
    lam = (np.sqrt(ne) + 0.12 + 0.11 / np.sqrt(ne)) * D
    k = np.arange(1, 101)
    if lam < 0.4:
        # the alternating series needs ~1/lam terms near zero; use the
        # theta-transformed representation instead
        if lam <= 0.0:
            return D, 1.0
        s = np.sum(np.exp(-((2 * k - 1) ** 2) * np.pi**2 / (8.0 * lam**2)))
        p = 1.0 - np.sqrt(2.0 * np.pi) / lam * s
    else:
        p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * (k * lam) ** 2))
    return D, float(min(max(p, 0.0), 1.0))


def psi_reference(kernel_cfg: dict, init_kind: str, t_final: float, dt: float = 1e-3,
                  a_max: int = 64) -> tuple[float, float, FPTrajectory]:
    """(r, psi) of the limit density at t_final for the named initial law."""
    kernel = kernel_from_config(kernel_cfg)
    if init_kind in ("iid_uniform", "mixing"):
        mu0 = uniform_field(a_max)
    elif init_kind in ("iid_two_point", "graph_adapted"):
        mu0 = initcond.TWO_POINT_ATOMS
    else:
        raise ConfigError(f"no reference law for init kind {init_kind!r}")
    traj = solve_fokker_planck(mu0, kernel, t_final, dt=dt, a_max=a_max)
    r, psi = traj.order_parameter_series()
    return float(r[-1]), float(psi[-1]), traj


def wrapped_diff(psi_n: np.ndarray, psi_ref: float) -> np.ndarray:
    """Angular difference wrapped to (-pi, pi]."""
    return np.angle(np.exp(1j * (np.asarray(psi_n) - psi_ref)))


def _iid_inits(kind: str, n: int, m: int, seed: int, replica_start: int) -> np.ndarray:
    out = np.empty((m, n))
    for r in range(m):
        out[r] = initcond.sample(initcond.InitSpec(kind), None, n, seed,
                                 replica_id=replica_start + r).phases
    return out


def psi_fluctuation_samples(graph, kernel, init_kind: str, sim: dict, m: int,
                            seed: int, psi_ref: float, replica_start: int = 0
                            ) -> tuple[np.ndarray, np.ndarray]:
    """sqrt(n) (psi_1^n - psi_1) and r_1^n over m replicas on a frozen graph."""
    n = graph.n
    cfg = SimConfig(dt=sim["dt"], t_final=sim["t_final"], seed=seed,
                    dtype=sim.get("dtype", "float64"), renorm=sim.get("renorm", "expected"))
    inits = _iid_inits(init_kind, n, m, seed, replica_start)
    final = simulate_ensemble(graph, inits, kernel, cfg, replica_start=replica_start)
    r, psi = order_parameter_of_phases(final)
    return np.sqrt(n) * wrapped_diff(psi, psi_ref), r


# ---------------------------------------------------------------------------
# experiment: lln
# ---------------------------------------------------------------------------

def run_lln(cfg: dict) -> StatTable:
    """W1 distances of global and local empirical measures to the limit
    over an n-grid, replicas sharing one frozen graph per n; one distance
    row per requested snapshot time."""
    params = cfg["params"]
    n_grid = params.get("n_grid", [250, 500, 1000, 2000])
    p = cfg["graph"].get("p", 0.5)
    m = cfg["replicas"]
    sim = cfg["sim"]
    kernel = kernel_from_config(cfg["kernel"])
    init_kind = cfg["init"].get("kind", "iid_uniform")
    snapshot_times = params.get("snapshot_times", [sim["t_final"]])
    _, _, mu_traj = psi_reference(cfg["kernel"], init_kind, sim["t_final"], dt=sim["dt"])
    rows = []
    for n in n_grid:
        graph = gen_erdos_renyi(n, p, seed=derive_seed(cfg["seed"], EXPERIMENT, n))
        cfg_sim = SimConfig(dt=sim["dt"], t_final=sim["t_final"], seed=cfg["seed"],
                            dtype=sim.get("dtype", "float64"))
        inits = _iid_inits(init_kind, n, m, cfg["seed"], 0)
        snap_steps = {int(round(t / sim["dt"])): t for t in snapshot_times}
        kept = {}
        if 0 in snap_steps:
            kept[0.0] = inits.copy()

        def keep(t, theta, _k=kept, _s=snap_steps, _dt=sim["dt"]):
            step = int(round(t / _dt))
            if step in _s:
                _k[_s[step]] = np.asarray(theta, dtype=np.float64).copy()

        final = simulate_ensemble(graph, inits, kernel, cfg_sim, reduce_fn=keep)
        if not kept:
            kept[sim["t_final"]] = final
        for t_snap, phases in sorted(kept.items()):
            mu_ref = mu_traj.at_time(t_snap)
            for r in range(m):
                mu_n = empirical_global(phases[r])
                w_global = w1_circle(mu_n, mu_ref)
                local = empirical_local(phases[r], graph, 0)
                mass = local.mass()
                w_local = w1_circle(local.normalized(), mu_ref)
                rows.append({"experiment": "lln", "n": n, "replica": r, "t": t_snap,
                             "w1_global": w_global, "w1_local": w_local,
                             "local_mass": mass})
    t_last = max(snapshot_times)
    summary = {}
    for n in n_grid:
        sub = [row for row in rows if row["n"] == n and row["t"] == t_last]
        summary[str(n)] = {
            "w1_global_mean": float(np.mean([r["w1_global"] for r in sub])),
            "w1_local_mean": float(np.mean([r["w1_local"] for r in sub])),
            "local_mass_within_5pct": float(np.mean(
                [abs(r["local_mass"] - 1.0) <= 0.05 for r in sub])),
        }
    means = [summary[str(n)]["w1_global_mean"] for n in n_grid]
    if len(n_grid) > 1:
        slope = float(np.polyfit(np.log(n_grid), np.log(means), 1)[0])
        summary["loglog_slope_global"] = slope
    return StatTable(rows, summary, {})


# ---------------------------------------------------------------------------
# experiment: universality (quenched graph per repetition)
# ---------------------------------------------------------------------------

def run_universality(cfg: dict) -> StatTable:
    params = cfg["params"]
    n = cfg["graph"].get("n", 1000)
    p_alt = params.get("p_alt", 0.5)
    reps = params.get("repetitions", 10)
    m = cfg["replicas"]
    sim = cfg["sim"]
    kernel = kernel_from_config(cfg["kernel"])
    init_kind = cfg["init"].get("kind", "iid_two_point")
    _, psi_ref, _ = psi_reference(cfg["kernel"], init_kind, sim["t_final"], dt=sim["dt"])
    rows = []
    rejections = 0
    for rep in range(reps):
        g_full = gen_erdos_renyi(n, 1.0, seed=derive_seed(cfg["seed"], EXPERIMENT, rep, 0))
        g_diluted = gen_erdos_renyi(n, p_alt, seed=derive_seed(cfg["seed"], EXPERIMENT, rep, 1))
        seed_a = derive_seed(cfg["seed"], EXPERIMENT, rep, 2)
        seed_b = derive_seed(cfg["seed"], EXPERIMENT, rep, 3)
        stat_a, _ = psi_fluctuation_samples(g_full, kernel, init_kind, sim, m, seed_a, psi_ref)
        stat_b, _ = psi_fluctuation_samples(g_diluted, kernel, init_kind, sim, m, seed_b, psi_ref)
        D, pval = ks_two_sample(stat_a, stat_b)
        reject = pval < params.get("alpha", 0.01)
        rejections += int(reject)
        rows.append({"experiment": "universality", "repetition": rep, "ks_D": D,
                     "ks_p": pval, "reject_at_alpha": bool(reject),
                     "mean_meanfield": float(stat_a.mean()),
                     "mean_diluted": float(stat_b.mean())})
    summary = {"repetitions": reps, "rejections": rejections,
               "fail_to_reject": reps - rejections}
    return StatTable(rows, summary, {})


# ---------------------------------------------------------------------------
# experiment: dephasing (annealed: fresh graph per replica)
# ---------------------------------------------------------------------------

def _dephasing_chunk(cfg: dict, chunk_start: int, chunk_size: int, psi_ref: float
                     ) -> list:
    n = cfg["graph"]["n"]
    sim = cfg["sim"]
    kernel = kernel_from_config(cfg["kernel"])
    tie_break = cfg["params"].get("tie_break", "uniform")
    m = chunk_size
    graphs = [gen_erdos_renyi(n, 0.5, symmetric=True,
                              seed=derive_seed(cfg["seed"], EXPERIMENT, 1, chunk_start + r))
              for r in range(m)]
    inits = np.empty((m, n))
    for r in range(m):
        state = initcond.sample(initcond.InitSpec("graph_adapted", tie_break=tie_break),
                                graphs[r], n, cfg["seed"], replica_id=chunk_start + r)
        inits[r] = state.phases
    cfg_sim = SimConfig(dt=sim["dt"], t_final=sim["t_final"], seed=cfg["seed"],
                        dtype=sim.get("dtype", "float64"))
    final = simulate_ensemble_multigraph(graphs, inits, kernel, cfg_sim,
                                         replica_start=chunk_start)
    r_vals, psi = order_parameter_of_phases(final)
    stat = np.sqrt(n) * wrapped_diff(psi, psi_ref)
    return [{"experiment": "dephasing", "arm": "graph_adapted",
             "replica": chunk_start + i, "stat": float(stat[i]),
             "r": float(r_vals[i]), "low_r_flag": bool(r_vals[i] < 0.05)}
            for i in range(m)]


def run_dephasing(cfg: dict) -> StatTable:
    """Figure-style comparison: graph-adapted initial data on a symmetric
    p=1/2 graph (graph resampled per replica: the statement is annealed)
    against the mean-field i.i.d. two-point baseline."""
    params = cfg["params"]
    n = cfg["graph"].get("n", 1000)
    cfg["graph"]["n"] = n
    m = cfg["replicas"]
    sim = cfg["sim"]
    kernel = kernel_from_config(cfg["kernel"])
    _, psi_ref, _ = psi_reference(cfg["kernel"], "iid_two_point", sim["t_final"],
                                  dt=sim["dt"])
    # baseline arm: complete graph, iid two-point, one frozen (trivial) graph
    g_full = gen_erdos_renyi(n, 1.0, seed=derive_seed(cfg["seed"], EXPERIMENT, 0))
    seed_base = derive_seed(cfg["seed"], EXPERIMENT, 2)
    stat_base, _ = psi_fluctuation_samples(g_full, kernel, "iid_two_point", sim, m,
                                           seed_base, psi_ref)
    rows = [{"experiment": "dephasing", "arm": "meanfield", "replica": i,
             "stat": float(stat_base[i])} for i in range(m)]
    chunk = int(cfg["sim"].get("replica_chunk", 250))
    workers = cfg.get("workers", 1)
    starts = list(range(0, m, chunk))
    jobs = [(cfg, s, min(chunk, m - s), psi_ref) for s in starts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_dephasing_chunk_star, jobs))
    else:
        results = [_dephasing_chunk(*job) for job in jobs]
    for res in results:
        rows.extend(res)
    stat_adapted = np.array([r["stat"] for r in rows if r["arm"] == "graph_adapted"])
    D, pval = ks_two_sample(stat_base, stat_adapted)
    se = np.sqrt(stat_base.var(ddof=1) / m + stat_adapted.var(ddof=1) / len(stat_adapted))
    summary = {
        "ks_D": D, "ks_p": pval,
        "mean_meanfield": float(stat_base.mean()),
        "mean_graph_adapted": float(stat_adapted.mean()),
        "mean_diff_over_se": float(abs(stat_base.mean() - stat_adapted.mean()) / se),
    }
    hists = {"meanfield": histogram_spec(stat_base),
             "graph_adapted": histogram_spec(stat_adapted)}
    return StatTable(rows, summary, hists)


def _dephasing_chunk_star(args):
    return _dephasing_chunk(*args)


# ---------------------------------------------------------------------------
# experiment: concentration
# ---------------------------------------------------------------------------

def run_concentration(cfg: dict) -> StatTable:
    from .concentration import tail_study

    params = cfg["params"]
    pattern = params.get("pattern", "pair_ij")
    n_grid = params.get("n_grid", [100, 400, 1600])
    p = cfg["graph"].get("p", 0.5)
    trials = params.get("trials", 200)
    rows = tail_study(pattern, n_grid, p, trials, cfg["seed"])
    summary = {f"n={row['n']}": {"upper_q99": row["upper_q99"], "lower_q99": row["lower_q99"]}
               for row in rows}
    return StatTable(rows, summary, {})


# ---------------------------------------------------------------------------
# experiment: spde-compare (zero kernel: both sides cheap and unbiased)
# ---------------------------------------------------------------------------

def run_spde_compare(cfg: dict) -> StatTable:
    params = cfg["params"]
    n = cfg["graph"].get("n", 2000)
    m_particles = cfg["replicas"]
    m_spde = params.get("spde_replicas", 10000)
    a_probe = params.get("mode", 1)
    a_max = params.get("a_max", 16)
    sim = cfg["sim"]
    T = sim["t_final"]
    kernel = kernel_from_config({"type": "zero"})
    g_full = gen_erdos_renyi(n, 1.0, seed=derive_seed(cfg["seed"], EXPERIMENT, 0))
    cfg_sim = SimConfig(dt=sim.get("dt", 0.01), t_final=T, seed=cfg["seed"])
    inits = _iid_inits("iid_uniform", n, m_particles, cfg["seed"], 0)
    final = simulate_ensemble(g_full, inits, kernel, cfg_sim)
    z = np.exp(1j * final).mean(axis=1) * np.sqrt(n)  # sqrt(n) <mu^n - mu, e^{i a .}>, a=1
    var_particle = float(np.mean(np.abs(z) ** 2))
    se_particle = float(np.std(np.abs(z) ** 2, ddof=1) / np.sqrt(m_particles))

    mu_traj = solve_fokker_planck(uniform_field(a_max), kernel, T, dt=sim.get("dt", 0.01),
                                  a_max=a_max)
    spec = InitialLawSpec("gaussian_clt", mu0=uniform_field(a_max))
    init_draws = sample_initial(spec, a_max, derive_seed(cfg["seed"], EXPERIMENT, 1),
                                m=m_spde)
    traj = solve_limit_eta(init_draws["eta0"], mu_traj, kernel,
                           seed=derive_seed(cfg["seed"], EXPERIMENT, 2))
    # pairing with exp(i a theta) = sqrt(2 pi) c_{-a}
    c = traj.final()[:, a_max - a_probe] * np.sqrt(TWO_PI)
    var_spde = float(np.mean(np.abs(c) ** 2))
    se_spde = float(np.std(np.abs(c) ** 2, ddof=1) / np.sqrt(m_spde))
    combined_se = float(np.hypot(se_particle, se_spde))
    summary = {
        "var_particle": var_particle, "se_particle": se_particle,
        "var_spde": var_spde, "se_spde": se_spde,
        "diff_over_se": float(abs(var_particle - var_spde) / combined_se),
    }
    rows = [{"experiment": "spde-compare", **summary}]
    return StatTable(rows, summary, {})


# ---------------------------------------------------------------------------
# experiment: local-fluct (initial covariances, noise covariation)
# ---------------------------------------------------------------------------

def _local_fields_on_rows(phases: np.ndarray, row1, row2, p: float, f_vals: np.ndarray,
                          f_mean_mu0: float) -> tuple:
    """(zeta1(f), zeta2(f), eta(f)) for one draw; f_vals = f(phases)."""
    n = len(phases)
    emp = f_vals.mean()
    eta = np.sqrt(n) * (emp - f_mean_mu0)
    z1 = np.sqrt(n * p) * (float(row1 @ f_vals) / (n * p) - f_mean_mu0)
    z2 = np.sqrt(n * p) * (float(row2 @ f_vals) / (n * p) - f_mean_mu0)
    return z1, z2, eta


def run_local_fluct(cfg: dict) -> StatTable:
    """Sample covariances of (zeta^{n,1}, zeta^{n,2}, eta^n)(f) at t=0
    against the limit formulas, plus the quadratic covariation of the
    local noises against p * int <mu_u, (f')^2> du.

    The test function cos(theta) + 0.7 has a nonzero mean, so the
    (1 - p) degree-fluctuation part of the variance is exercised too.
    """
    params = cfg["params"]
    n = cfg["graph"].get("n", 2000)
    m = cfg["replicas"]
    p_list = params.get("p_list", [0.2, 1.0])
    seed = cfg["seed"]
    shift = 0.7
    f = lambda th: np.cos(th) + shift     # noqa: E731
    fp = lambda th: -np.sin(th)           # noqa: E731
    f_mean = shift                        # uniform mu0: int cos dmu0 = 0
    rows = []
    summary = {}
    for p in p_list:
        rng = stream(seed, EXPERIMENT, int(100 * p))
        draws = np.empty((m, 3))
        for k in range(m):
            phases = rng.uniform(0.0, TWO_PI, size=n)
            row1 = rng.random(n) < p
            row2 = rng.random(n) < p
            f_vals = f(phases)
            draws[k] = _local_fields_on_rows(phases, row1, row2, p, f_vals, f_mean)
        C = np.cov(draws.T)
        var_f = 0.5  # Var_unif(cos + shift) = 1/2
        expected = {
            "C_zeta_zeta": var_f + (1.0 - p) * f_mean**2,
            "C_zeta1_zeta2": p * var_f,
            "C_zeta_eta": np.sqrt(p) * var_f,
            "C_eta_eta": var_f,
        }
        got = {
            "C_zeta_zeta": float((C[0, 0] + C[1, 1]) / 2),
            "C_zeta1_zeta2": float(C[0, 1]),
            "C_zeta_eta": float((C[0, 2] + C[1, 2]) / 2),
            "C_eta_eta": float(C[2, 2]),
        }
        se = {k: float(np.sqrt(2.0 / m) * max(abs(expected[k]), var_f)) for k in expected}
        rows.append({"experiment": "local-fluct", "p": p, **{f"got_{k}": v for k, v in got.items()},
                     **{f"want_{k}": v for k, v in expected.items()}})
        summary[f"p={p}"] = {k: {"got": got[k], "want": expected[k], "se": se[k]}
                             for k in expected}

        # quadratic covariation of W^{n,1}, W^{n,2} along free Brownian paths
        T = cfg["sim"]["t_final"]
        dt = cfg["sim"].get("dt", 0.01)
        steps = int(round(T / dt))
        m_cov = params.get("covariation_replicas", 200)
        rng2 = stream(seed, EXPERIMENT, 1000 + int(100 * p))
        qc = np.empty(m_cov)
        for k in range(m_cov):
            phases = rng2.uniform(0.0, TWO_PI, size=n)
            row1 = (rng2.random(n) < p).astype(float)
            row2 = (rng2.random(n) < p).astype(float)
            acc = 0.0
            for _ in range(steps):
                dB = rng2.standard_normal(n) * np.sqrt(dt)
                g1 = fp(phases)
                acc += float((row1 * g1) @ dB * ((row2 * g1) @ dB))
                phases = phases + dB
            qc[k] = acc / (n * p)
        want_qc = p * T * 0.5    # p int_0^T <unif, sin^2> du
        summary[f"p={p}"]["quadratic_covariation"] = {
            "got": float(qc.mean()), "want": want_qc,
            "se": float(qc.std(ddof=1) / np.sqrt(m_cov)),
        }
    return StatTable(rows, summary, {})


# ---------------------------------------------------------------------------
# experiment: degree-renorm
# ---------------------------------------------------------------------------

def run_degree_renorm(cfg: dict) -> StatTable:
    """Variance of the centered renormalised degree D^{n,l} against 1-p."""
    params = cfg["params"]
    n = cfg["graph"].get("n", 2000)
    m = cfg["replicas"]
    p_list = params.get("p_list", [0.3, 0.7])
    rows = []
    summary = {}
    for p in p_list:
        rng = stream(cfg["seed"], EXPERIMENT, int(1000 * p))
        draws = np.sqrt(n * p) * ((rng.random((m, n)) < p).mean(axis=1) / p - 1.0)
        var = float(draws.var(ddof=1))
        se = float(var * np.sqrt(2.0 / (m - 1)))
        rows.append({"experiment": "degree-renorm", "p": p, "var_D": var,
                     "want": 1.0 - p, "se": se})
        summary[f"p={p}"] = {"var_D": var, "want": 1.0 - p, "se": se}
    return StatTable(rows, summary, {})


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

_RUNNERS = {
    "lln": run_lln,
    "universality": run_universality,
    "dephasing": run_dephasing,
    "concentration": run_concentration,
    "spde-compare": run_spde_compare,
    "local-fluct": run_local_fluct,
    "degree-renorm": run_degree_renorm,
}


def run(cfg: dict, force: bool = False) -> str:
    """Execute an experiment config; returns the output directory.
    Re-running a completed config is a no-op (idempotence by hash)."""
    cfg = validate_config(cfg)
    h = config_hash(cfg)
    out_dir = os.path.join(cfg["out"], f"{cfg['experiment']}-{h}")
    marker = os.path.join(out_dir, "summary.json")
    if os.path.exists(marker) and not force:
        return out_dir
    table = _RUNNERS[cfg["experiment"]](cfg)
    table.write(out_dir, cfg)
    return out_dir
