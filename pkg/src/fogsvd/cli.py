"""Command-line driver: setup, run, app, attack and bench."""
from __future__ import annotations

import argparse
import csv
import json
import os
import random
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import apps, attacks, crypto, protocol
from .eigen import svd_oracle
from .sysparams import ConfigurationError, SystemParams, init_system


class InputFormatError(ValueError):
    def __init__(self, msg: str, path: str, row: int | None = None, column: int | None = None):
        super().__init__(msg)
        self.path, self.row, self.column = path, row, column


def read_int_csv(path: str | Path, allow_negative_one: bool = False) -> list[list[int]]:
    """Integer grid; positions in errors are 1-based."""
    rows = []
    with open(path, newline="") as fh:
        for i, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            row = []
            for j, cell in enumerate(rec, start=1):
                try:
                    v = int(cell.strip())
                except ValueError:
                    raise InputFormatError(f"not an integer: {cell!r}", str(path), i, j) from None
                if v < 0 and not (allow_negative_one and v == -1):
                    raise InputFormatError(f"negative value {v}", str(path), i, j)
                row.append(v)
            if rows and len(row) != len(rows[0]):
                raise InputFormatError(f"expected {len(rows[0])} columns, got {len(row)}",
                                       str(path), i, len(row))
            rows.append(row)
    if not rows:
        raise InputFormatError("empty matrix", str(path))
    return rows


def write_csv(path: str | Path, M) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for r in np.asarray(M).tolist():
            w.writerow([repr(float(x)) for x in r])


def dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def seed_of(args):
    env = os.environ.get("FOGSVD_SEED")
    return env if env is not None else args.seed


# --- subcommands -------------------------------------------------------------------

def cmd_setup(args) -> dict:
    params = init_system(
        args.users, args.dims, args.dmax, modulus_bits=args.modulus_bits,
        attack_resistant=not args.no_attack_resistant, seed=seed_of(args),
        mask_mode=args.mask_mode, kappa1=args.kappa1, normalize=args.normalize,
        fd_fanout=args.fd_fanout)
    files = params.save(args.out)
    return {"files": {k: str(v) for k, v in files.items()},
            "n_ciphertexts": params.n_ciphertexts, "slots_per_ciphertext": params.chunk_size,
            "kappa1": params.kappa1, "kappa2": params.kappa2, "kappa3": params.kappa3}


def cmd_run(args) -> dict:
    params = SystemParams.load(args.params)
    A = read_int_csv(args.data)
    res = protocol.run_protocol(params, A, seed_of(args), workers=args.workers)
    out = res.to_dict()
    dump(out, args.out)
    return {"written": args.out} if args.out else None


def _app_params(builder, A, args, **kw):
    return builder(len(A[0]), len(A), max(max(r) for r in A), modulus_bits=args.modulus_bits,
                   seed=seed_of(args), **kw)


def cmd_app(args) -> dict:
    seed = seed_of(args)
    if args.app == "detect":
        base = read_int_csv(args.baseline)
        window = read_int_csv(args.window)
        if len(base) != len(window):
            raise InputFormatError("baseline and window differ in dimension count", args.window)
        ref = apps.masked_correlation(_app_params(apps.detection_params, base, args), base, seed)
        cur = apps.masked_correlation(_app_params(apps.detection_params, window, args), window, seed)
        angle = apps.detect_shift(ref.first_vector, cur.first_vector)
        return {"angle": angle, "threshold": args.threshold, "anomaly": angle > args.threshold,
                "baseline_first_vector": ref.first_vector.tolist(),
                "window_first_vector": cur.first_vector.tolist()}
    if args.app == "recommend":
        R = read_int_csv(args.ratings, allow_negative_one=True)
        A = apps.fill_unknown(R)
        params = _app_params(apps.recommend_params, A, args, fbits=args.fbits)
        session = apps.recommend_session(params, R, seed)
        score = apps.recommend(session, apps.ReputationQuery(args.user, args.item, args.k),
                               args.fbits)
        return {"user": args.user, "item": args.item, "k": args.k, "score": score}
    if args.app == "compress":
        A = read_int_csv(args.data)
        params = _app_params(apps.factor_params, A, args)
        factors, _, _ = apps.masked_factors(params, A, seed)
        approx = apps.compress(factors, args.k).reconstruct()
        write_csv(args.out, approx)
        return {"written": args.out, "k": args.k, "sigma": factors.sigma.tolist(),
                "frobenius_error": float(np.linalg.norm(np.asarray(A, float) - approx))}
    raise SystemExit(f"unknown app {args.app}")


def cmd_attack(args) -> dict:
    if args.attack == "certify":
        return attacks.certify(SystemParams.load(args.params)).to_dict()
    pairs = read_int_csv(args.known)
    if any(len(r) != 2 for r in pairs):
        raise InputFormatError("known pairs need two columns (masked, plain)", args.known)
    # only the public file is read: the mask bound t is known to every party
    pub = json.loads(Path(args.params).read_text()) if args.params else None
    t = 1 << pub["kappa1"] if pub else args.mask_bound
    res = attacks.brute_force_s([r[0] for r in pairs], [r[1] for r in pairs], args.max_bits, t)
    out = res.to_dict()
    if pub:
        out["kappa3"] = pub["kappa3"]
    return out


def _time(fn, iterations: int) -> dict:
    samples = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return {"mean": statistics.fmean(samples), "stdev": statistics.stdev(samples),
            "iterations": iterations}


def cmd_bench(args) -> dict:
    params = SystemParams.load(args.params)
    pk, kp = params.public_key, params.keypair
    rng = random.Random(0)
    m = rng.randrange(pk.n)
    c = crypto.encrypt(pk, m, rng=rng)
    r = crypto.random_unit(pk, rng)
    it = args.iterations
    prim = {
        "exponentiation": _time(lambda: crypto.powmod(r, pk.n, pk.nsquare), it),
        "encrypt": _time(lambda: crypto.encrypt(pk, m, rng=rng), it),
        "decrypt": _time(lambda: crypto.decrypt(kp, c), it),
        "ciphertext_multiply": _time(lambda: crypto.mul(c, c, pk), it),
        "randomize": _time(lambda: crypto.mul(c, crypto.encrypt(pk, m, r=1), pk), it),
    }
    t_exp, t_mul = prim["exponentiation"]["mean"], prim["ciphertext_multiply"]["mean"]
    N, nc = params.N, params.n_ciphertexts
    counts = {
        "ED": {"exp": 2 * nc, "mul": nc},
        "FD_per_ED": {"exp": nc, "mul": nc},
        "SD_d": {"exp": N * nc, "mul": 0},
    }
    totals = {k: v["exp"] * t_exp + v["mul"] * t_mul for k, v in counts.items()}
    report = {"primitives": prim, "operation_counts": counts, "entity_seconds": totals,
              "enron_formula_seconds": 4 * t_exp * 150 * 15}
    if args.data:
        A = read_int_csv(args.data)
        res = protocol.run_protocol(params, A, seed_of(args))
        tr = res.transcript
        pub = params.public()
        n2 = 2 * pub.modulus_bits
        closed = {
            "ED_to_FD_per_ED": nc * n2,
            "FDs_to_SD_d": N * nc * n2,
            "SD_d_to_SD_u": params.l ** 2 * protocol.gram_entry_bits(pub, "u"),
            "SD_d_to_SD_v": N ** 2 * protocol.gram_entry_bits(pub, "v"),
        }
        measured = {
            "ED_to_FD_per_ED": tr.bits("ED", "FD") // N,
            "FDs_to_SD_d": tr.bits("FD", "SD_d"),
            "SD_d_to_SD_u": tr.bits("SD_d", "SD_u"),
            "SD_d_to_SD_v": tr.bits("SD_d", "SD_v"),
        }
        report["transcript_bits"] = {"closed_form": closed, "measured": measured,
                                     "match": closed == measured}
        report["sigma_matches_oracle"] = bool(np.allclose(
            res.sigma, svd_oracle(A).sigma, rtol=1e-9, atol=1e-9))
    return report


# --- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fogsvd", description="Privacy-preserving SVD over fog devices")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("setup", help="generate public parameters and role secrets")
    s.add_argument("--users", type=int, required=True)
    s.add_argument("--dims", type=int, required=True)
    s.add_argument("--dmax", type=int, required=True)
    s.add_argument("--modulus-bits", type=int, default=1024)
    s.add_argument("--mask-mode", choices=["coordinated", "independent"], default="coordinated")
    s.add_argument("--kappa1", type=int)
    s.add_argument("--normalize", choices=["rows", "columns"])
    s.add_argument("--fd-fanout", type=int, default=8)
    s.add_argument("--no-attack-resistant", action="store_true")
    s.add_argument("--seed")
    s.add_argument("--out", default="params.json")

    r = sub.add_parser("run", help="run the full protocol on a CSV matrix")
    r.add_argument("--params", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--seed")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out")

    a = sub.add_parser("app", help="applications")
    asub = a.add_subparsers(dest="app", required=True)
    for name in ("detect", "recommend", "compress"):
        ap = asub.add_parser(name)
        ap.add_argument("--modulus-bits", type=int, default=1024)
        ap.add_argument("--seed")
        if name == "detect":
            ap.add_argument("--baseline", required=True)
            ap.add_argument("--window", required=True)
            ap.add_argument("--threshold", type=float, default=0.2)
        elif name == "recommend":
            ap.add_argument("--ratings", required=True)
            ap.add_argument("--user", type=int, required=True)
            ap.add_argument("--item", type=int, required=True)
            ap.add_argument("--k", type=int, default=2)
            ap.add_argument("--fbits", type=int, default=apps.DEFAULT_FBITS)
        else:
            ap.add_argument("--data", required=True)
            ap.add_argument("--k", type=int, required=True)
            ap.add_argument("--out", required=True)

    t = sub.add_parser("attack", help="attack simulations and parameter certification")
    tsub = t.add_subparsers(dest="attack", required=True)
    b = tsub.add_parser("brute")
    b.add_argument("--params")
    b.add_argument("--known", required=True)
    b.add_argument("--max-bits", type=int, default=20)
    b.add_argument("--mask-bound", type=int, help="public mask bound t when --params is absent")
    c = tsub.add_parser("certify")
    c.add_argument("--params", required=True)

    be = sub.add_parser("bench", help="time primitives and account for costs")
    be.add_argument("--params", required=True)
    be.add_argument("--data")
    be.add_argument("--iterations", type=int, default=100)
    be.add_argument("--seed")
    return p


COMMANDS = {"setup": cmd_setup, "run": cmd_run, "app": cmd_app, "attack": cmd_attack,
            "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = COMMANDS[args.command](args)
    except InputFormatError as e:
        err = {"error": "InputFormatError", "message": str(e), "file": e.path}
        if e.row is not None:
            err.update(row=e.row, column=e.column)
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    except (ConfigurationError, protocol.ProtocolError, apps.RankError,
            apps.DegenerateDimensionError, ValueError, OSError, KeyError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1
    if out is not None:
        dump(out, None)
    return 0


if __name__ == "__main__":
    sys.exit(main())
