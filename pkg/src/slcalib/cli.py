"""Command-line front end.

Exit codes: 0 success, 1 validation failure, 2 bad input, 3 numerical failure.
"""

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, analysis, families, flow, symmetry

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    """Bad command-line input; exit code 2."""


def fmt(x):
    """Shortest decimal string that round-trips the float."""
    return repr(float(x))


def fmt17(x):
    return "%.17g" % float(x)


# ---------------------------------------------------------------- parameter records

def read_param_file(path):
    """Flat 'key = value' file; blank lines and '#' comments are ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{n}: expected 'key = value'")
        key, val = (x.strip() for x in line.split("=", 1))
        if not key or key in out:
            raise InputError(f"{path}:{n}: empty or repeated key {key!r}")
        out[key] = val
    return out


def parse_extra_flags(extra):
    """'--key value' pairs left over by argparse, as a dict of strings."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise InputError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, val = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise InputError(f"flag {tok} needs a value")
            key, val = tok[2:], extra[i + 1]
            i += 2
        out[key] = val
    return out


def to_float(key, val):
    try:
        x = float(val)
    except (TypeError, ValueError):
        raise InputError(f"parameter {key} = {val!r} is not a number") from None
    if not math.isfinite(x):
        raise InputError(f"parameter {key} = {val!r} is not finite")
    return x


class Params:
    """Parameter record; every read marks the key as used."""

    def __init__(self, raw):
        self.raw = dict(raw)
        self.used = set()

    def real(self, key, default=0.0):
        self.used.add(key)
        return to_float(key, self.raw[key]) if key in self.raw else float(default)

    def integer(self, key, default=None):
        self.used.add(key)
        if key not in self.raw:
            if default is None:
                raise InputError(f"missing parameter {key}")
            return default
        x = self.real(key)
        if x != int(x):
            raise InputError(f"parameter {key} must be an integer")
        return int(x)

    def cplx(self, key):
        return complex(self.real(key + ".re"), self.real(key + ".im"))

    def vec(self, name):
        return np.array([self.cplx(f"{name}.{j}") for j in (1, 2, 3)])

    def check_unused(self):
        extra = sorted(set(self.raw) - self.used)
        if extra:
            raise InputError(f"unknown parameter(s): {', '.join(extra)}")

    def record(self):
        return {k: fmt(to_float(k, v)) for k, v in sorted(self.raw.items())}


def load_params(args, extra):
    raw = read_param_file(args.params) if getattr(args, "params", None) else {}
    raw.update(parse_extra_flags(extra))
    return Params(raw)


# ---------------------------------------------------------------- families

FAMILIES = ("case-iii", "case-a", "case-b", "case-c", "case-d", "k")


def _alphas(P):
    return families.AlphaTriple(P.real("alpha1"), P.real("alpha2"), P.real("alpha3"))


def build_family(name, P):
    """Family object for the named closed-form or integrated solution."""
    if name == "case-iii":
        p = families.CaseIIIParams(P.cplx("A"), P.cplx("B"), P.cplx("D"), P.cplx("E"))
        return families.caseiii_family(p), p.residual()
    if name == "case-a":
        p = families.CaseAParams(*(P.real(k) for k in ("B", "C", "E", "F", "Bp", "Cp", "Ep", "Fp")))
        return families.CaseAFamily(p), p.residual()
    if name in ("case-b", "case-c"):
        al = _alphas(P)
        if name == "case-b":
            w0 = families.caseb_w(0.0, al)
        else:
            w0 = families.casec_wu(0.0, al, P.real("Aconst"))[2]
        p0, q0, r0 = P.vec("p"), P.vec("q"), P.vec("r")
        res = float(np.max(np.abs(flow.lemma91_invariants(w0, p0, q0))))
        if res > flow.ADMISSIBLE_TOL:
            raise families.InadmissibleParameters(
                f"initial p, q violate Im(sum eta_j w_j p_j) = Im(sum eta_j w_j q_j) = "
                f"Im(sum eta_j p_j q_j) = 0 (residual {res:.3e})")
        fam = families.diagonal_family(w0, p0, q0, r0, name)
        if name == "case-c":
            fam.h = 1e-4
        return fam, res
    if name == "case-d":
        al = _alphas(P)
        p = families.CaseDParams(al, P.cplx("C"), P.cplx("D"), P.cplx("Cp"), P.cplx("Dp"),
                                 P.cplx("E1"), P.cplx("E2"), P.cplx("E3"))
        return families.cased_family(p), p.residual()
    if name == "k":
        k = P.integer("k")
        if k < 1:
            raise InputError("k must be >= 1")
        A = [P.cplx(f"A{j}") for j in range(1, k + 1)]
        B = [P.cplx(f"B{j}") for j in range(1, k + 1)]
        return families.k_family(families.KFamilyParams(k, tuple(A), tuple(B))), A[0].imag
    raise InputError(f"unknown family {name!r}")


# ---------------------------------------------------------------- grids

def parse_axis(flag, text):
    parts = str(text).split(":")
    if len(parts) != 3:
        raise InputError(f"--{flag} expects min:max:n, got {text!r}")
    lo, hi = to_float(flag, parts[0]), to_float(flag, parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise InputError(f"--{flag}: n must be an integer") from None
    if n < 1:
        raise InputError(f"--{flag}: n must be at least 1")
    if n > 1 and not lo < hi:
        raise InputError(f"--{flag}: need min < max")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def grid_axes(args, system):
    names = ("x", "y") if system == "pq" else ("y1", "y2")
    vals = []
    for nm in names + ("t",):
        text = getattr(args, nm.replace("-", "_"), None)
        if text is None:
            raise InputError(f"missing grid flag --{nm}")
        vals.append(parse_axis(nm, text))
    other = ("y1", "y2") if system == "pq" else ("x", "y")
    for nm in other:
        if getattr(args, nm, None) is not None:
            raise InputError(f"--{nm} does not apply to this family")
    return names, vals


def thread_count():
    text = os.environ.get("SLCALIB_THREADS", "1")
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise InputError(f"SLCALIB_THREADS must be a positive integer, got {text!r}")
    return n


def states_on(fam, ts):
    """Family states at each time. Closed-form families are evaluated in
    chunks by up to SLCALIB_THREADS workers; integrated families run as one
    integration so that the output does not depend on the worker count."""
    workers = thread_count()
    if workers == 1 or len(ts) < 2 or not isinstance(fam, families.ExpSumFamily):
        return np.asarray(fam.state(ts))
    chunks = [c for c in np.array_split(ts, min(workers, len(ts))) if len(c)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: np.asarray(fam.state(c)), chunks))
    return np.concatenate(parts, axis=0)


def evaluate_grid(fam, axes):
    u, v, ts = axes
    S = states_on(fam, ts)
    U, V, _ = np.meshgrid(u, v, ts, indexing="ij")
    phi = families.assemble_phi(S[None, None], U, V, fam.system)
    if not np.all(np.isfinite(phi)):
        raise flow.IntegrationError("non-finite values in the evaluated family")
    return phi


# ---------------------------------------------------------------- output

def write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def csv_text(names, axes, phi):
    head = list(names) + ["t"] + [f"{p}_z{j}" for j in (1, 2, 3) for p in ("re", "im")]
    rows = [",".join(head)]
    u, v, ts = axes
    for i, a in enumerate(u):
        for j, b in enumerate(v):
            for l, t in enumerate(ts):
                z = phi[i, j, l]
                vals = [a, b, t] + [x for c in z for x in (c.real, c.imag)]
                rows.append(",".join(fmt(x) for x in vals))
    return "\n".join(rows) + "\n"


def manifest_text(command, params, extra=None, started=None):
    rec = {"command": command, "tool": "slcalib", "version": __version__, "parameters": params}
    rec.update(extra or {})
    if started is not None:
        rec["elapsed_seconds"] = fmt(time.perf_counter() - started)
    return json.dumps(rec, indent=2, sort_keys=True) + "\n"


def manifest_path(args):
    if getattr(args, "manifest", None):
        return args.manifest
    if args.out and args.out != "-":
        return args.out + ".manifest.json"
    return None


# ---------------------------------------------------------------- commands

def cmd_family_eval(args, extra):
    started = time.perf_counter() if args.timing else None
    P = load_params(args, extra)
    fam, residual = build_family(args.family, P)
    P.check_unused()
    names, axes = grid_axes(args, fam.system)
    phi = evaluate_grid(fam, axes)
    write_text(args.out, csv_text(names, axes, phi))
    mpath = manifest_path(args)
    if mpath:
        info = {"family": args.family,
                "grid": {nm: [fmt(ax[0]), fmt(ax[-1]), len(ax)] for nm, ax in zip(names + ("t",), axes)},
                "rows": int(phi.shape[0] * phi.shape[1] * phi.shape[2]),
                "tolerances": {"admissibility": fmt(families.ADMISSIBLE_TOL)},
                "residual_summary": {"constraint_residual": fmt(abs(residual))}}
        write_text(mpath, manifest_text("family-eval", P.record(), info, started))
    return EXIT_OK


SYSTEM_VECTORS = {"z": ["z1", "z2", "z3", "z4", "z5", "z6"], "w": ["w"],
                  "wpqr": ["w", "p", "q", "r"]}


def vector_names(system, P=None, k=None):
    if system == "pq":
        if k is None:
            k = P.integer("k")
            if k < 1:
                raise InputError("k must be >= 1")
        return [f"p{j}" for j in range(k + 1)] + ["q1", "q2"]
    return SYSTEM_VECTORS[system]


def read_state(args, system):
    P = Params(read_param_file(args.init))
    names = vector_names(system, P)
    state = np.array([P.vec(nm) for nm in names])
    P.check_unused()
    if system == "w":
        state = state[0]
    return state, P


def trajectory_text(system, names, traj):
    head = ["t"] + [f"{p}_{nm}_{j}" for nm in names for j in (1, 2, 3) for p in ("re", "im")]
    rows = [",".join(head)]
    for t, s in traj:
        s = np.atleast_2d(s)
        vals = [t] + [x for vec in s for c in vec for x in (c.real, c.imag)]
        rows.append(",".join(fmt(x) for x in vals))
    return "\n".join(rows) + "\n"


def cmd_evolve(args, extra):
    started = time.perf_counter() if args.timing else None
    if extra:
        raise InputError(f"unexpected arguments {' '.join(extra)}")
    state0, P = read_state(args, args.system)
    names = vector_names(args.system, k=flow.pq_k(state0) if args.system == "pq" else None)
    try:
        cfg = flow.IntegratorCfg(args.method, args.step, args.tol, record_every=args.record_every)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cons = flow.constraints_for(args.system)
    traj = flow.integrate(flow.RHS[args.system], state0, args.t0, args.t1, cfg, cons)
    drift = 0.0
    if cons is not None:
        c = np.abs(cons(traj.states))
        drift = float(np.max(np.abs(c - c[0]), initial=0.0))
    write_text(args.out, trajectory_text(args.system, names, traj))
    report = f"steps = {traj.steps}\nmax_constraint_drift = {drift:.6e}\n"
    sys.stderr.write(report) if args.out in (None, "-") else sys.stdout.write(report)
    mpath = manifest_path(args)
    if mpath:
        info = {"system": args.system, "t0": fmt(args.t0), "t1": fmt(args.t1),
                "integrator": {"method": cfg.method, "step": fmt(cfg.step), "tol": fmt(cfg.tol),
                               "record_every": cfg.record_every},
                "tolerances": {"admissibility": fmt(flow.ADMISSIBLE_TOL)},
                "residual_summary": {"max_constraint_drift": fmt(drift), "steps": traj.steps}}
        write_text(mpath, manifest_text("evolve", P.record(), info, started))
    return EXIT_OK


def source_family(args, extra):
    if bool(args.family) == bool(args.init):
        raise InputError("give exactly one of --family or --init")
    if args.family:
        P = load_params(args, extra)
        fam, _ = build_family(args.family, P)
        P.check_unused()
        return fam
    if extra:
        raise InputError(f"unexpected arguments {' '.join(extra)}")
    state0, _ = read_state(args, args.system)
    if args.system not in ("z", "pq", "wpqr"):
        raise InputError("validate needs a z, pq or wpqr initial state")
    if args.system == "wpqr":
        return families.IntegratedFamily(flow.rhs_wpqr, state0, "z", pack=flow.pack_wpqr)
    return families.IntegratedFamily(flow.RHS[args.system], state0, args.system)


def cmd_validate(args, extra):
    fam = source_family(args, extra)
    if args.samples < 1:
        raise InputError("--samples must be positive")
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    rng = np.random.default_rng(args.seed)
    grid = analysis.sample_grid(rng, args.samples, (-2.0, 2.0), (0.0, args.t_max))
    rep = analysis.sl_residual(fam, grid)
    ok = rep.passes(args.tol)
    write_text(args.out, rep.as_text() + f"tol = {args.tol:.6e}\nresult = {'pass' if ok else 'fail'}\n")
    return EXIT_OK if ok else EXIT_VALIDATION


def read_triple(args, extra):
    if args.family:
        fam = source_family(args, extra)
        if fam.system != "z":
            raise InputError("classification applies to z-system families")
        return np.asarray(fam.state(args.time))[:3]
    if extra:
        raise InputError(f"unexpected arguments {' '.join(extra)}")
    P = Params(read_param_file(args.init))
    zs = np.array([P.vec(nm) for nm in ("z1", "z2", "z3")])
    for nm in ("z4", "z5", "z6"):
        P.vec(nm)
    P.check_unused()
    return zs


def complex_text(c):
    return f"{fmt(c.real)},{fmt(c.imag)}"


def _rank_rounded(sv):
    """Singular values with those counted as zero printed as exact zeros."""
    top = max(sv) if len(sv) else 0.0
    return [x if x > symmetry.RANK_TOL * top else 0.0 for x in sv]


def cmd_classify(args, extra):
    args.system = "z"
    zs = read_triple(args, extra)
    rep = symmetry.classify_case(*zs)
    lines = [f"case = {rep.case}", f"dimension = {rep.dimension}",
             "singular_values = " + " ".join(f"{x:.6e}" for x in _rank_rounded(rep.singular_values))]
    if rep.quadric:
        lines.append(f"quadric = {rep.quadric}")
    write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_normalize(args, extra):
    args.system = "z"
    zs = read_triple(args, extra)
    found = symmetry.classify_case(*zs).case
    case = found if args.case == "auto" else args.case
    if case != found:
        raise InputError(f"data is in case ({found}), not case ({case})")
    if case == "iii":
        n = symmetry.normalize_case_iii(*zs)
    elif case == "iv":
        n = symmetry.normalize_case_iv(*zs)
    else:
        raise InputError(f"no normal form is implemented for case ({case})")
    g = n.g
    lines = [f"case = {case}", f"degenerate = {str(bool(n.degenerate)).lower()}",
             "g = " + " ".join(fmt(x) for x in (g.a, g.b, g.c, g.d, g.e, g.f))]
    for i in range(3):
        lines.append(f"U{i + 1} = " + " ".join(complex_text(c) for c in n.U[i]))
    for i in range(3):
        lines.append(f"z{i + 1} = " + " ".join(complex_text(c) for c in n.z[i]))
    write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_periodicity(args, extra):
    if extra:
        raise InputError(f"unexpected arguments {' '.join(extra)}")
    if args.scan_qmax is not None:
        if args.p is not None or args.q is not None:
            raise InputError("--scan-qmax excludes --p/--q")
        pairs = analysis.coprime_pairs(args.scan_qmax)
    elif args.p is None or args.q is None:
        raise InputError("give --p and --q, or --scan-qmax")
    else:
        pairs = [(args.p, args.q)]
    rows = ["p,q,a1,a2,a3,lambda,alpha1,alpha2,alpha3"]
    for p, q in pairs:
        try:
            per, _ = analysis.periodicity_from_pq(p, q)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        rows.append(",".join(str(x) for x in (p, q) + per.a + (per.lam,) + per.alpha_ints))
    write_text(args.out, "\n".join(rows) + "\n")
    return EXIT_OK


COORD_INDEX = {"re1": 0, "im1": 1, "re2": 2, "im2": 3, "re3": 4, "im3": 5}


def parse_coords(text):
    if text == "re-re-re":
        return (0, 2, 4)
    parts = text.split(",")
    if len(parts) != 3 or any(p not in COORD_INDEX for p in parts) or len(set(parts)) != 3:
        raise InputError(f"--coords must be re-re-re or three distinct names from "
                         f"{', '.join(COORD_INDEX)}, got {text!r}")
    return tuple(COORD_INDEX[p] for p in parts)


def obj_text(phi, coords, header):
    n1, n2, nt = phi.shape[:3]
    real = np.stack([phi.real, phi.imag], axis=-1).reshape(phi.shape[:3] + (6,))
    lines = [f"# {header}", f"# grid {n1} x {n2} x {nt}"]
    for i in range(n1):
        for j in range(n2):
            for l in range(nt):
                lines.append("v " + " ".join(fmt17(real[i, j, l, c]) for c in coords))

    def idx(i, j, l):
        return 1 + (i * n2 + j) * nt + l

    for j in range(n2):
        for i in range(n1 - 1):
            for l in range(nt - 1):
                lines.append(f"f {idx(i, j, l)} {idx(i + 1, j, l)} {idx(i + 1, j, l + 1)} {idx(i, j, l + 1)}")
    for i in range(n1):
        for j in range(n2 - 1):
            for l in range(nt - 1):
                lines.append(f"f {idx(i, j, l)} {idx(i, j + 1, l)} {idx(i, j + 1, l + 1)} {idx(i, j, l + 1)}")
    return "\n".join(lines) + "\n"


def cmd_mesh(args, extra):
    coords = parse_coords(args.coords)
    P = load_params(args, extra)
    fam, _ = build_family(args.family, P)
    P.check_unused()
    names, axes = grid_axes(args, fam.system)
    phi = evaluate_grid(fam, axes)
    write_text(args.out, obj_text(phi, coords, f"slcalib {__version__} {args.family}"))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _grid_flags(p):
    for nm in ("y1", "y2", "x", "y", "t"):
        p.add_argument(f"--{nm}", metavar="MIN:MAX:N")


def build_parser():
    parser = argparse.ArgumentParser(prog="slcalib", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"slcalib {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub_kw = {"allow_abbrev": False}

    p = sub.add_parser("family-eval", help="sample a family on a grid and write CSV", **sub_kw)
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--params")
    _grid_flags(p)
    p.add_argument("--out", default="-")
    p.add_argument("--manifest")
    p.add_argument("--timing", action="store_true", help="record elapsed time in the manifest")
    p.set_defaults(func=cmd_family_eval)

    p = sub.add_parser("evolve", help="integrate a flow from an initial state file", **sub_kw)
    p.add_argument("--system", required=True, choices=("z", "pq", "w", "wpqr"))
    p.add_argument("--init", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--method", default="rk4")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--out", default="-")
    p.add_argument("--manifest")
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("validate", help="SL residuals of a family on random samples", **sub_kw)
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--params")
    p.add_argument("--init")
    p.add_argument("--system", default="z", choices=("z", "pq", "wpqr"))
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=float, default=4 * math.pi)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_validate)

    for name, func, helptext in (("classify", cmd_classify, "case of the initial triple z1, z2, z3"),
                                 ("normalize", cmd_normalize, "normal form of a case (iii)/(iv) triple")):
        p = sub.add_parser(name, help=helptext, **sub_kw)
        p.add_argument("--init")
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--params")
        p.add_argument("--time", type=float, default=0.0)
        p.add_argument("--out", default="-")
        if name == "normalize":
            p.add_argument("--case", default="auto", choices=("auto", "iii", "iv"))
        p.set_defaults(func=func)

    p = sub.add_parser("periodicity", help="integer frequencies of rational case-(d) families", **sub_kw)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--scan-qmax", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_periodicity)

    p = sub.add_parser("mesh", help="export a sampled patch as OBJ", **sub_kw)
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--params")
    _grid_flags(p)
    p.add_argument("--coords", default="re-re-re")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INPUT
    try:
        with np.errstate(all="ignore"):
            return args.func(args, extra)
    except InputError as exc:
        msg, code = str(exc), EXIT_INPUT
    except (families.InadmissibleParameters, flow.InadmissibleState) as exc:
        msg, code = f"inadmissible input: {exc}", EXIT_INPUT
    except (flow.IntegrationError, symmetry.DegenerateData, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        msg, code = f"numerical failure: {exc}", EXIT_NUMERIC
    except ValueError as exc:
        msg, code = str(exc), EXIT_INPUT
    sys.stderr.write(f"slcalib {args.command}: {msg}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
