#!/usr/bin/env python3
"""
Long-running end-to-end checks: synthetic distillation, determinism and desk-scale MNIST.
Prints a pass/fail line per check and exits non-zero if any check fails.
"""

import argparse
import filecmp
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from pkdmamba.config import load_config, load_splits  # noqa: E402
from pkdmamba.distill import RunStore, ensemble_accuracy, prefix_accuracies, run_pkd, train_teacher  # noqa: E402
from pkdmamba.extensions import configure_logging  # noqa: E402
from pkdmamba.metrics import accuracy, flops_estimate, write_round_log  # noqa: E402
from pkdmamba.models import predict_logits, save_model  # noqa: E402


def print_header():
    print("PKD acceptance run")
    print("=" * 60)


def report(name, passed, detail):
    mark = "✅" if passed else "❌"
    print(f"{mark} {name}: {detail}")
    return passed


def distill_into(cfg, out_dir):
    train, test = load_splits(cfg.dataset, cfg.seed)
    teacher, _ = train_teacher(cfg.teacher, train, cfg.train, cfg.seed)
    save_model(teacher, Path(out_dir) / "teacher.mpkd")
    store = RunStore(out_dir, "acceptance")
    result = run_pkd(teacher, cfg.ladder, train, cfg.hyper, cfg.train, cfg.seed, eval_data=test, store=store)
    write_round_log(result.rows, Path(out_dir) / "round_log.csv")
    return teacher, result, test


def check_synthetic(seed):
    cfg = load_config("synthetic", seed=seed)
    start = time.time()
    with tempfile.TemporaryDirectory() as tmp:
        teacher, result, test = distill_into(cfg, tmp)
    teacher_acc = accuracy(predict_logits(teacher, test.images), test.labels)
    ok = report("synthetic teacher", teacher_acc >= 0.95, f"test accuracy {teacher_acc:.3f} (need >= 0.95)")
    accepted = len(result.ensemble)
    ok &= report("synthetic weak learners", accepted >= 2, f"{accepted} accepted (need >= 2)")
    if accepted:
        ens_acc = ensemble_accuracy(result.ensemble, test.images, test.labels, test.n_classes)
        ok &= report("synthetic ensemble", teacher_acc - ens_acc <= 0.05,
                     f"ensemble {ens_acc:.3f} vs teacher {teacher_acc:.3f} (gap <= 0.05)")
    print(f"   elapsed {time.time() - start:.0f}s")
    return ok


def check_determinism(seed):
    cfg = load_config("synthetic", seed=seed)
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        distill_into(cfg, a)
        distill_into(cfg, b)
        files = sorted(p.relative_to(a) for p in Path(a).rglob("*") if p.is_file())
        same = [str(f) for f in files if filecmp.cmp(Path(a) / f, Path(b) / f, shallow=False)]
        return report("determinism", bool(files) and len(same) == len(files),
                      f"{len(same)}/{len(files)} output files byte-identical")


def check_mnist_desk(seed, data_dir):
    cfg = load_config("mnist-desk", seed=seed)
    cfg = replace(cfg, dataset=replace(cfg.dataset, data_dir=data_dir))
    with tempfile.TemporaryDirectory() as tmp:
        teacher, result, test = distill_into(cfg, tmp)
    teacher_acc = accuracy(predict_logits(teacher, test.images), test.labels)
    ok = report("desk MNIST teacher", teacher_acc >= 0.92, f"test accuracy {teacher_acc:.3f} (need >= 0.92)")
    fraction = flops_estimate(cfg.ladder[0]) / flops_estimate(cfg.teacher)
    ok &= report("desk MNIST student-1 cost", fraction < 0.10, f"FLOPs fraction {fraction:.3f} (need < 0.10)")
    flops = [flops_estimate(c) for c in cfg.ladder]
    ok &= report("desk MNIST ladder order", all(a < b for a, b in zip(flops, flops[1:])), f"FLOPs {flops}")
    first = [row for row in result.rows if row["rung"] == 1 and row["round"] == 1]
    if first and first[0]["student_accuracy"] is not None:
        ok &= report("desk MNIST student-1", first[0]["student_accuracy"] >= 0.55,
                     f"test accuracy {first[0]['student_accuracy']:.3f} (need >= 0.55)")
    prefixes = prefix_accuracies(result.ensemble, test.images, test.labels)
    if prefixes:
        ok &= report("desk MNIST anytime", prefixes[-1] - prefixes[0] >= 0.10,
                     f"prefix accuracy {prefixes[0]:.3f} -> {prefixes[-1]:.3f} (need +0.10)")
    else:
        ok &= report("desk MNIST anytime", False, "no student accepted")
    return ok


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-determinism", action="store_true", help="skip the repeated synthetic run")
    parser.add_argument("--mnist-dir", default=os.environ.get("PKD_MNIST_DIR"),
                        help="directory with the MNIST IDX files (default $PKD_MNIST_DIR)")
    parser.add_argument("--log-level", default="WARNING")
    args = parser.parse_args()

    configure_logging(args.log_level)
    print_header()
    results = [check_synthetic(args.seed)]
    if not args.skip_determinism:
        results.append(check_determinism(args.seed))
    if args.mnist_dir:
        results.append(check_mnist_desk(args.seed, args.mnist_dir))
    else:
        print("⚠️ desk MNIST skipped: pass --mnist-dir or set PKD_MNIST_DIR")

    print()
    if all(results):
        print("🎉 All acceptance checks passed")
        return 0
    print("❌ Some acceptance checks failed")
    return 1


if __name__ == "__main__":
    sys.exit(main())
