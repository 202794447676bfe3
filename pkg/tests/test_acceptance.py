"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Training lengths: the reproduction runs (criterion 6) use the default
T = 500 iterations; the noise sweeps (criteria 7 and 8) use T = 100 to keep
the density-matrix and coherent runs within tens of minutes on one core.
All runs average over seeds 0-9 with the dataset fixed at seed 0.
"""
import numpy as np
import pytest

from nystrom_qek.ansatz import AnsatzParams, init_params
from nystrom_qek.datasets import make_checkers, make_corners
from nystrom_qek.estimator import seed_streams
from nystrom_qek.experiment import count_executions, parse_config, run_experiment, run_single
from nystrom_qek.kernel import ExecutionLedger, QuantumKernel
from nystrom_qek.noise import NOISELESS, NoiseConfig, insert_depolarizing, simulate
from nystrom_qek.nystrom import nystrom_test, nystrom_train, select_landmarks, LandmarkSet
from nystrom_qek.pipeline import build_test_kernel, build_train_kernel, evaluate
from nystrom_qek.simulator import Gate
from nystrom_qek.ansatz import CircuitSpec
from nystrom_qek import svm
from nystrom_qek.trainer import TrainConfig, kta_gradient, train

from conftest import record_criterion

pytestmark = pytest.mark.slow

SEEDS = range(10)
T_REPRO = 500
T_NOISE = 100


def test_criterion_1_kernel_properties():
    rng = np.random.default_rng(1)
    worst = dict(sym=0.0, diag=0.0, eig=np.inf, self=0.0)
    for _ in range(50):
        X = rng.uniform(-1, 1, (12, 2))
        qk = QuantumKernel(init_params(5, 4, rng))
        K = qk.matrix(X).values
        worst["sym"] = max(worst["sym"], np.abs(K - K.T).max())
        worst["diag"] = max(worst["diag"], np.abs(np.diag(K) - 1).max())
        worst["eig"] = min(worst["eig"], np.linalg.eigvalsh(K).min())
        worst["self"] = max(worst["self"], np.abs(qk.pair_values(X, X) - 1).max())
    ok = (worst["sym"] <= 1e-9 and worst["diag"] <= 1e-9 and worst["eig"] >= -1e-8
          and worst["self"] <= 1e-9)
    detail = ("asym {sym:.1e}, diag err {diag:.1e}, min eig {eig:.2e}, "
              "|K(x,x)-1| {self:.1e}").format(**worst)
    assert record_criterion(1, ok, detail)


def test_criterion_2_one_qubit_closed_form():
    params = AnsatzParams([[1.0]], [[[0.0, 0.0]]])
    grid = np.linspace(-np.pi, np.pi, 10)
    a, b = (m.ravel() for m in np.meshgrid(grid, grid))
    vals = QuantumKernel(params).pair_values(np.c_[a, np.zeros(100)], np.c_[b, np.zeros(100)])
    err = np.abs(vals - np.cos((a - b) / 2) ** 2).max()
    assert record_criterion(2, err <= 1e-9, f"max error {err:.1e} over 100 grid points")


def test_criterion_3_gradient_check():
    rng = np.random.default_rng(3)
    worst = {"lambda": 0.0, "theta": 0.0}
    for _ in range(20):
        X = rng.uniform(-1, 1, (4, 2))
        y = rng.permutation([1, 1, -1, -1])
        params = init_params(5, 4, rng)
        params.lam = rng.uniform(0.5, 1.5, params.lam.shape)
        _, g_ps = kta_gradient(X, y, params)
        _, g_fd = kta_gradient(X, y, params, method="finite_difference", fd_step=1e-4)
        n_lam = params.lam.size
        for name, sl in (("lambda", slice(0, n_lam)), ("theta", slice(n_lam, None))):
            rel = np.linalg.norm(g_ps[sl] - g_fd[sl]) / np.linalg.norm(g_fd[sl])
            worst[name] = max(worst[name], rel)
    ok = max(worst.values()) <= 1e-4
    detail = f"worst relative error lambda {worst['lambda']:.1e}, theta {worst['theta']:.1e}"
    assert record_criterion(3, ok, detail)


def _rbf(A, B, gamma=1.5):
    return np.exp(-gamma * ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1))


def _eig_nystrom(K_NM, K_MM, K_PM):
    import scipy.linalg
    M, N = K_MM.shape[0], K_NM.shape[0]
    w, U = scipy.linalg.eigh(K_MM)
    keep = w > 1e-10 * w.max()
    w, U = w[keep], U[:, keep]
    U_nys = np.sqrt(M / N) * K_NM @ U / w
    U_test = np.sqrt(M / N) * K_PM @ U / w
    lam = (N / M) * w
    return (U_nys * lam) @ U_nys.T, (U_test * lam) @ U_nys.T


def test_criterion_4_nystrom():
    ds = make_checkers(0)
    qk = QuantumKernel(init_params(5, 4, 4))
    X, P = ds.train_x, ds.test_x
    exact = build_train_kernel(qk, X)
    full = build_train_kernel(qk, X, "nystrom", LandmarkSet(np.arange(len(X))))
    err_train = np.linalg.norm(full.values - exact.values)
    err_test = np.linalg.norm(build_test_kernel(qk, P, X, full)
                              - build_test_kernel(qk, P, X, exact))
    rng = np.random.default_rng(4)
    Xr, Pr = rng.uniform(-1, 1, (20, 2)), rng.uniform(-1, 1, (10, 2))
    K = _rbf(Xr, Xr)
    err_rbf_full = np.linalg.norm(nystrom_train(K, K) - K)
    oracle_gap = 0.0
    for M in (2, 5, 10):
        idx = np.sort(rng.choice(20, M, replace=False))
        K_NM, K_MM, K_PM = _rbf(Xr, Xr[idx]), K[np.ix_(idx, idx)], _rbf(Pr, Xr[idx])
        ref_train, ref_test = _eig_nystrom(K_NM, K_MM, K_PM)
        ours = nystrom_train(K_NM, K_MM)
        oracle_gap = max(oracle_gap, np.abs(ours - ref_train).max(),
                         np.abs(nystrom_test(K_PM, K_MM, K_NM) - ref_test).max(),
                         abs(np.linalg.norm(ours - K) - np.linalg.norm(ref_train - K)))
    ok = max(err_train, err_test, err_rbf_full) <= 1e-8 and oracle_gap <= 1e-10
    detail = (f"M=N Frobenius error train {err_train:.1e}, test {err_test:.1e}, "
              f"rbf {err_rbf_full:.1e}; oracle gap {oracle_gap:.1e}")
    assert record_criterion(4, ok, detail)


def test_criterion_5_execution_accounting():
    rng = np.random.default_rng(5)
    rows, ok = [], True
    for N, M in [(30, 2), (30, 4), (30, 8), (100, 8)]:
        X, P = rng.uniform(-1, 1, (N, 2)), rng.uniform(-1, 1, (N, 2))
        qk = QuantumKernel(init_params(5, 4, rng))
        for method, lm in (("standard", None), ("nystrom", select_landmarks(N, M, rng))):
            start = qk.ledger.count
            tk = build_train_kernel(qk, X, method, lm)
            mid = qk.ledger.count
            build_test_kernel(qk, P, X, tk)
            measured = (mid - start, qk.ledger.count - mid)
            pred = count_executions(N, N, M if method == "nystrom" else None, method)
            ok &= measured == (pred["train"], pred["test"])
            if method == "nystrom":
                rows.append(f"N={N},M={M}: {std_train} vs {measured[0]}")
            else:
                std_train = measured[0]
    assert record_criterion(5, ok, "train executions standard vs nystrom " + "; ".join(rows))


def _shared_runs(ds, T, landmark_counts):
    """Train once per seed, evaluate every method at iteration 0 and T."""
    N = len(ds.train_y)
    out = {m: {"kta0": [], "ktaT": [], "test": []} for m in ["standard"] + list(landmark_counts)}
    for seed in SEEDS:
        s_init, s_batch, _, s_noise, _ = seed_streams(seed)
        params0 = init_params(5, 4, s_init)
        params, _ = train(ds.train_x, ds.train_y, params0, TrainConfig(iterations=T, seed=seed),
                          NOISELESS, ExecutionLedger(), s_batch, s_noise)
        for key in out:
            if key == "standard":
                method, lm = "standard", None
            else:
                method, lm = "nystrom", select_landmarks(N, key, seed_streams(seed)[2])
            for stage, prm in (("kta0", params0), ("ktaT", params)):
                r = evaluate(QuantumKernel(prm), ds.train_x, ds.train_y, ds.test_x, ds.test_y,
                             method, lm)
                out[key][stage].append(r.kta_full)
                if stage == "ktaT":
                    out[key]["test"].append(r.test_acc)
    return {k: {s: float(np.mean(v)) for s, v in d.items()} for k, d in out.items()}


@pytest.fixture(scope="module")
def reproduction():
    return {"checkers": _shared_runs(make_checkers(0), T_REPRO, (2, 4, 8)),
            "corners": _shared_runs(make_corners(seed=0), T_REPRO, (2, 4, 8))}


def test_criterion_6_training_reproduction(reproduction):
    ok, parts = True, []
    for name, res in reproduction.items():
        rising = all(r["ktaT"] > r["kta0"] for r in res.values())
        std_acc, nys_acc = res["standard"]["test"], res[8]["test"]
        ok &= rising and std_acc >= 0.85 and abs(nys_acc - std_acc) <= 0.1
        kta = ", ".join(f"{k}:{r['kta0']:.3f}->{r['ktaT']:.3f}" for k, r in res.items())
        parts.append(f"{name} KTA [{kta}] test acc standard {std_acc:.3f} M=8 {nys_acc:.3f}")
    assert record_criterion(6, ok, f"T={T_REPRO}; " + "; ".join(parts))


def _noise_sweep(noise, levels, method, landmarks=8):
    text = (f"dataset = checkers\niterations = {T_NOISE}\nsnapshot_every = {T_NOISE}\n"
            f"seeds = 0-9\nmethod = {method}\nlandmarks = {landmarks}\nnoise = {noise}\n"
            f"noise_levels = {', '.join(map(str, levels))}\n")
    cfg = parse_config(text)
    ds = make_checkers(0)
    res = {}
    for lvl in levels:
        finals = [run_single(cfg, s, lvl, ds)["rows"][-1] for s in SEEDS]
        res[lvl] = {"kta": float(np.mean([r[2] for r in finals])),
                    "test": float(np.mean([r[4] for r in finals]))}
    return res


def test_criterion_7_depolarizing():
    rng = np.random.default_rng(7)
    params = init_params(5, 4, rng)
    X = rng.uniform(-1, 1, (10, 2))
    sv = QuantumKernel(params).matrix(X).values
    dm = QuantumKernel(params, noise=NoiseConfig("depolarizing", p=0.0)).matrix(X).values
    eq_err = np.abs(sv - dm).max()
    one_gate = CircuitSpec([Gate("RY", 0, angle=np.pi)], {}, 1)
    gate_err = max(abs(simulate(insert_depolarizing(one_gate, p)) - 2 * p / 3)
                   for p in (0.0, 0.01, 0.1, 0.5, 1.0))
    full = QuantumKernel(params, noise=NoiseConfig("depolarizing", p=0.75))
    full_err = np.abs(full.pair_values(X[:5], X[5:]) - 2.0**-4).max()
    sweep = _noise_sweep("depolarizing", [0.0, 0.1], "standard")
    drop = sweep[0.0]["test"] - sweep[0.1]["test"]
    ok = eq_err <= 1e-10 and gate_err <= 1e-9 and full_err <= 1e-9 and drop <= 0.15
    detail = (f"p=0 engine gap {eq_err:.1e}; single gate {gate_err:.1e}; p=3/4 {full_err:.1e}; "
              f"T={T_NOISE} test acc p=0 {sweep[0.0]['test']:.3f}, p=0.1 {sweep[0.1]['test']:.3f} "
              f"(drop {drop:.3f}, limit 0.15)")
    assert record_criterion(7, ok, detail)


def test_criterion_8_coherent():
    rng = np.random.default_rng(8)
    params = init_params(5, 4, rng)
    X = rng.uniform(-1, 1, (10, 2))
    clean = QuantumKernel(params).matrix(X).values
    zero = QuantumKernel(params, noise=NoiseConfig("coherent", sigma=0.0), rng=3).matrix(X).values
    ps_clean = QuantumKernel(params).pair_values_and_partials(X[:3], X[3:6])
    ps_zero = QuantumKernel(params, noise=NoiseConfig("coherent", sigma=0.0)).pair_values_and_partials(
        X[:3], X[3:6])
    bit_exact = np.array_equal(clean, zero) and all(
        np.array_equal(a, b) for a, b in zip(ps_clean, ps_zero))
    sweep = _noise_sweep("coherent", [0.0, 0.2, 1.0], "nystrom", landmarks=2)
    ktas = [sweep[s]["kta"] for s in (0.0, 0.2, 1.0)]
    ok = bit_exact and ktas[0] >= ktas[1] >= ktas[2]
    detail = (f"sigma=0 bit-exact {bit_exact}; T={T_NOISE} Nystrom M=2 mean KTA "
              + ", ".join(f"sigma={s}: {k:.4f}" for s, k in zip((0, 0.2, 1.0), ktas)))
    assert record_criterion(8, ok, detail)


def test_criterion_9_svm():
    m1 = svm.fit(np.eye(2), [1, -1], C=1.0)
    m2 = svm.fit(np.eye(2), [1, -1], C=0.5)
    analytic = (np.array_equal(m1.alphas, [1.0, 1.0]) and m1.bias == 0.0
                and np.array_equal(m2.alphas, [0.5, 0.5]))
    rng = np.random.default_rng(9)
    kkt_bad = mono_bad = 0
    n_models = 0
    ds = make_checkers(0)
    for seed in range(10):
        qk = QuantumKernel(init_params(5, 4, seed))
        K = qk.matrix(ds.train_x).values
        lm = select_landmarks(30, 4, rng)
        tk = build_train_kernel(QuantumKernel(init_params(5, 4, seed)), ds.train_x, "nystrom", lm)
        for Kfit, fix in ((K, False), (tk.values, True)):
            for C in (0.5, 1.0, 10.0):
                m = svm.fit(Kfit, ds.train_y, C=C, tol=1e-6, psd_fix=fix)
                used = svm.clip_psd(Kfit) if fix else Kfit
                kkt_bad += svm.kkt_violations(m, used, 1e-6).size
                mono_bad += int(np.any(np.diff(m.dual_history) < -1e-12))
                n_models += 1
    ok = analytic and kkt_bad == 0 and mono_bad == 0
    detail = (f"analytic 2-point {analytic}; {n_models} fits: KKT violators {kkt_bad}, "
              f"non-monotone duals {mono_bad}")
    assert record_criterion(9, ok, detail)


def test_criterion_10_determinism(tmp_path):
    text = ("dataset = checkers\nlayers = 3\niterations = 6\nsnapshot_every = 3\nseeds = 0-2\n"
            "method = nystrom\nlandmarks = 4\nnoise = coherent\nnoise_levels = 0, 0.2\n")
    cfg = parse_config(text)
    run_experiment(cfg, tmp_path / "serial")
    run_experiment(cfg, tmp_path / "serial_again")
    run_experiment(cfg, tmp_path / "parallel", jobs=3)
    names = sorted(p.name for p in (tmp_path / "serial").iterdir())
    same = all((tmp_path / "serial" / n).read_bytes() == (tmp_path / d / n).read_bytes()
               for n in names for d in ("serial_again", "parallel"))
    detail = f"{len(names)} output files byte-identical across rerun and 3 workers: {same}"
    assert record_criterion(10, same, detail)
