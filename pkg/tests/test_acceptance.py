"""End-to-end acceptance gate.

Each test pins a quantitative requirement with explicit tolerances and a
runtime budget.  The heavyweight pipeline runs are shared through
session-scoped fixtures so the whole suite stays within the budgets.
"""

import json
import time
from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from conmet.cli import _solve_stage, _verify_stage, load_config, main
from conmet.cli import _system_from_table, verification_system
from conmet.kernel import build_wendland, wendland_poly
from conmet.mesh import locate, standard_triangulation
from conmet.recovery import build_gram, solve_recovery
from conmet.systems import linear_system, vanderpol
from conmet.verify import sym_eig_range

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class _Log:
    def note(self, msg):
        pass


def run_config(name, rho_key="rho"):
    cfg = load_config(CONFIG_DIR / name)
    sys_model = _system_from_table(cfg["system"])
    vsys = verification_system(cfg, sys_model)
    t0 = time.perf_counter()
    cset, rec = _solve_stage(cfg, sys_model, _Log(), threads=4)
    cpa, rep = _verify_stage(cfg, rec, vsys,
                             float(cfg["triangulation"]["rho"]), _Log(),
                             threads=4)
    elapsed = time.perf_counter() - t0
    return SimpleNamespace(cfg=cfg, sys=sys_model, vsys=vsys, cset=cset,
                           rec=rec, cpa=cpa, rep=rep, elapsed=elapsed)


@pytest.fixture(scope="session")
def vdp_run(tmp_path_factory):
    run = run_config("vanderpol_desk.toml")
    out = tmp_path_factory.mktemp("vdp_artifacts")
    run.cset.to_csv(out / "collocation.csv")
    run.cpa.export_csv(out / "vertices.csv", out / "simplices.csv")
    run.rep.write_vertex_csv(out / "report_vertices.csv", run.cpa.tri.vertices)
    run.rep.write_simplex_csv(out / "report_simplices.csv")
    run.out = out
    return run


@pytest.fixture(scope="session")
def sc_run():
    return run_config("speedcontrol_desk.toml")


@pytest.fixture(scope="session")
def pert_run():
    return run_config("speedcontrol_pert_desk.toml")


def disk_simplices(tri, center, radius):
    """Indices of all simplices whose closed triangle intersects the disk."""
    V = tri.vertices[tri.simplices] - np.asarray(center)   # (S, 3, 2)
    vnorm = np.linalg.norm(V, axis=2)
    cand = np.flatnonzero(vnorm.min(axis=1) <= radius + tri.h.max())
    A = V[cand]
    B = V[cand][:, [1, 2, 0], :]
    AB = B - A
    t = np.clip(-(A * AB).sum(-1) / (AB * AB).sum(-1), 0.0, 1.0)
    d_edge = np.linalg.norm(A + t[..., None] * AB, axis=2).min(axis=1)
    # the center itself sits inside at most one simplex; detect it exactly
    try:
        inside, _ = locate(tri, np.asarray(center, dtype=float))
    except Exception:
        inside = -1
    keep = d_edge <= radius
    out = set(cand[keep].tolist())
    if inside >= 0:
        out.add(int(inside))
    return np.array(sorted(out))


def test_kernel_correctness():
    t0 = time.perf_counter()

    def poly_mul(p, q):
        out = [Fraction(0)] * (len(p) + len(q) - 1)
        for i, a in enumerate(p):
            for j, b in enumerate(q):
                out[i + j] += a * b
        return out

    ref = [Fraction(1)]
    for _ in range(10):
        ref = poly_mul(ref, [Fraction(1), Fraction(-1)])
    ref = poly_mul(ref, [Fraction(c) for c in (25, 250, 1050, 2250, 2145)])
    mine = wendland_poly(6, 4)
    nz = [(a, b) for a, b in zip(mine, ref) if a != 0 or b != 0]
    ratio = nz[0][0] / nz[0][1]
    assert all(a == ratio * b for a, b in nz)

    assert wendland_poly(1, 1) == (Fraction(1, 6), Fraction(0),
                                   Fraction(-1, 2), Fraction(1, 3))

    ker = build_wendland(2, 4, 0.9)
    rs = np.linspace(0.05, 0.75 / ker.c, 100)
    h = 1e-5
    d0 = (ker.psi(0, rs + h) - ker.psi(0, rs - h)) / (2 * h)
    assert (np.abs(ker.psi(1, rs) - d0 / rs) / np.abs(d0 / rs)).max() <= 1e-6
    d1 = (ker.psi(1, rs + h) - ker.psi(1, rs - h)) / (2 * h)
    assert (np.abs(ker.psi(2, rs) - d1 / rs)
            / np.abs(ker.psi(2, rs))).max() <= 1e-6
    assert time.perf_counter() - t0 < 1.0


def test_gram_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(17)
    ker = build_wendland(2, 4, 0.9)
    for _ in range(10):
        A = rng.normal(size=(2, 2))
        A = A - (max(np.linalg.eigvals(A).real) + 0.5) * np.eye(2)
        sys = linear_system(A, name="lin")
        N = int(rng.integers(5, 21))
        X = rng.uniform(-1, 1, (N, 2)) + 1e-3 * np.arange(N)[:, None]
        G = build_gram(sys, ker, X)
        assert np.abs(G - G.T).max() <= 1e-12
        assert np.linalg.eigvalsh(G).min() > 0
    assert time.perf_counter() - t0 < 10.0


def test_interpolation_conditions_vanderpol_desk(vdp_run):
    t0 = time.perf_counter()
    rec = vdp_run.rec
    worst = 0.0
    for x in rec.points:
        worst = max(worst, np.abs(rec.evaluate_F_S(x) + rec.C).max())
    assert worst <= 1e-8
    assert time.perf_counter() - t0 < 30.0


def test_analytic_oracle():
    from scipy.linalg import solve_lyapunov
    t0 = time.perf_counter()
    ker = build_wendland(2, 4, 0.9)
    probes_ax = np.linspace(-0.75, 0.75, 21)
    probes = np.array([(x, y) for x in probes_ax for y in probes_ax])
    for A in (-np.eye(2), np.array([[-1.0, 1.0], [0.0, -2.0]])):
        sys = linear_system(A, name="lin")
        M = solve_lyapunov(A.T.copy(), -np.eye(2))

        def sup_error(spacing):
            xs = np.arange(-1.5, 1.5 + spacing / 2, spacing)
            X = np.array([(x, y) for x in xs for y in xs])
            rec = solve_recovery(sys, ker, X, np.eye(2))
            S = rec.evaluate_S_many(probes)
            return max(np.linalg.norm(S[i] - M, 2) for i in range(len(probes)))

        e_coarse, e_fine = sup_error(0.25), sup_error(0.125)
        assert e_fine <= 1e-3
        assert e_fine < e_coarse
    assert time.perf_counter() - t0 < 60.0


def test_gradient_check():
    vdp = vanderpol()
    ker = build_wendland(2, 4, 0.9)
    rng = np.random.default_rng(23)
    X = rng.uniform(-1.2, 1.2, (20, 2))
    rec = solve_recovery(vdp, ker, X, np.eye(2))
    h = 1e-6
    for x in rng.uniform(-1.0, 1.0, (50, 2)):
        g = rec.evaluate_grad_S(x)
        fd = np.stack([(rec.evaluate_S(x + h * e) - rec.evaluate_S(x - h * e))
                       / (2 * h) for e in np.eye(2)], axis=-1)
        assert np.abs(g - fd).max() / max(1.0, np.abs(fd).max()) <= 1e-5


def test_mesh_certificates():
    from shapely.geometry import LineString, Point, Polygon
    for rho in (1.0, 0.5, 0.1):
        tri = standard_triangulation(np.array([[0.0, 1.0]] * 2), rho)
        assert tri.is_bounded(np.sqrt(2) * rho * (1 + 1e-9),
                              2 * np.sqrt(2) * (1 + 1e-12))
    tri = standard_triangulation(np.array([[0.0, 1.0]] * 2), 0.25)
    rng = np.random.default_rng(29)
    for x in rng.uniform(0, 1, (1000, 2)):
        nu, lam = locate(tri, x)
        assert np.abs(lam @ tri.vertices[tri.simplices[nu]] - x).max() <= 1e-12
    mesh = standard_triangulation(np.array([[0.0, 3.0]] * 2), 1.0)
    polys = [Polygon(mesh.vertices[s]) for s in mesh.simplices]
    vsets = [set(map(tuple, mesh.vertices[s])) for s in mesh.simplices]
    for a in range(mesh.n_simplices):
        for b in range(a + 1, mesh.n_simplices):
            inter = polys[a].intersection(polys[b])
            if inter.is_empty:
                continue
            shared = vsets[a] & vsets[b]
            if isinstance(inter, Point):
                assert (inter.x, inter.y) in shared
            else:
                assert isinstance(inter, LineString)
                ends = set(map(tuple, inter.coords))
                assert len(ends) == 2 and ends <= shared


def test_verifier_soundness_spot_check(vdp_run):
    cpa, rep, sys = vdp_run.cpa, vdp_run.rep, vdp_run.vsys
    rng = np.random.default_rng(31)
    passing = np.flatnonzero(rep.c4_pass)
    assert len(passing) > 0
    picks = rng.choice(passing, size=100, replace=True)
    tri = cpa.tri
    for nu in picks:
        lam = rng.dirichlet(np.ones(3))
        x = lam @ tri.vertices[tri.simplices[nu]]
        P = cpa.evaluate(x)
        J = sys.jacobian(x)
        M = P @ J + J.T @ P + cpa.orbital_term(int(nu), sys.f(x))
        assert np.linalg.eigvalsh(M).max() < 0
    # eigenvalue routine agreement with the closed 2x2 form
    S = rng.normal(size=(500, 2, 2))
    S = S + S.transpose(0, 2, 1)
    lo, hi = sym_eig_range(S)
    w = np.linalg.eigvalsh(S)
    assert np.abs(lo - w[:, 0]).max() <= 1e-10
    assert np.abs(hi - w[:, 1]).max() <= 1e-10


def test_linear_end_to_end(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "out"
    assert main(["run", "--config", str(CONFIG_DIR / "linear_desk.toml"),
                 "--out", str(out), "--mode", "relaxed"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["c1_fraction"] == 1.0
    assert summary["c4_fraction"] == 1.0
    assert summary["verified"] is True
    assert time.perf_counter() - t0 < 60.0


def test_vanderpol_desk_scale(vdp_run):
    assert vdp_run.elapsed < 600.0
    assert vdp_run.cset.n_points >= 300
    rep, tri = vdp_run.rep, vdp_run.cpa.tri
    disk = disk_simplices(tri, (0.0, 0.0), 0.5)
    assert len(disk) > 0
    assert rep.c4_pass[disk].all()
    assert rep.c1_pass[np.unique(tri.simplices[disk])].all()
    # the vertices adjacent to the origin satisfy the definiteness check
    nu0, _ = locate(tri, np.zeros(2))
    assert rep.c1_pass[tri.simplices[nu0]].all()


def test_speed_control_desk_scale(sc_run):
    assert sc_run.elapsed < 600.0
    assert sc_run.cset.n_points == 547
    rep, tri = sc_run.rep, sc_run.cpa.tri
    near_origin = disk_simplices(tri, (0.0, 0.0), 0.05)
    assert len(near_origin) > 0
    assert rep.c4_pass[near_origin].all()
    assert rep.c1_pass[np.unique(tri.simplices[near_origin])].all()
    saddle, _ = locate(tri, np.array([-0.2113, 0.0]))
    assert not rep.c4_pass[saddle]


def test_perturbation_robustness(pert_run):
    assert pert_run.vsys.name != pert_run.sys.name
    rep, tri = pert_run.rep, pert_run.cpa.tri
    eq = np.array([-0.6648, -0.1])
    # the perturbed field really has an equilibrium there
    assert np.abs(pert_run.vsys.f(eq)).max() < 1e-3
    region = disk_simplices(tri, eq, 0.05)
    assert len(region) > 0
    assert rep.c4_pass[region].all()
    assert rep.c1_pass[np.unique(tri.simplices[region])].all()


def test_determinism_byte_identical(tmp_path):
    cfgp = str(CONFIG_DIR / "linear_desk.toml")
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", "--config", cfgp, "--out", str(out)]) == 0
    for name in ["vertices.csv", "simplices.csv", "report_vertices.csv",
                 "report_simplices.csv", "summary.json", "recovery.json"]:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_plotkit_renders_desk_report(vdp_run, tmp_path):
    plotkit = pytest.importorskip("plotkit")
    out1 = tmp_path / "fig1.png"
    out2 = tmp_path / "fig2.png"
    argv = ["--vertices", str(vdp_run.out / "report_vertices.csv"),
            "--simplices", str(vdp_run.out / "simplices.csv"),
            "--points", str(vdp_run.out / "collocation.csv"),
            "--equilibria", "0,0",
            "--box", "-1.5", "1.5", "-1.5", "1.5"]
    assert plotkit.cli.main(argv + ["--out", str(out1)]) == 0
    assert out1.is_file() and out1.stat().st_size > 0
    assert plotkit.cli.main(argv + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
