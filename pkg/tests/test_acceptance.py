"""Acceptance gate: one test per numbered criterion, each at its stated tolerance.

Criteria 1-4 run in seconds.  Criteria 5-9 share one desk-scale training
session (640 samples rendered at 256 px, trained at 128 px: 512 train /
128 held out) and take about an hour on a single CPU core.  Set
``TRYON_ACCEPTANCE_DIR`` to keep the trained checkpoints between runs; an
existing checkpoint there is reused instead of retrained.

A PASS/FAIL line per criterion is printed in the terminal summary.
Run directly with ``python tests/test_acceptance.py``.
"""

import dataclasses
import math
import os
from pathlib import Path

import numpy as np
import pytest
import torch

from oracles import bce_scalar, ce_scalar, central_difference, dice_scalar, mae_scalar, relative_error
from tryon.agvton import (
    TryOnGenerator,
    ablate_without_classifier,
    dice_loss,
    load_vton,
    synthesize,
    train_agvton,
    vton_loss,
)
from tryon.attr_clf import (
    AttributeClassifier,
    ac_loss,
    classify_type,
    cross_entropy,
    evaluate_classifier,
    load_classifier,
    mean_absolute_error,
    train_classifier,
)
from tryon.checkpoint import Checkpoint, weights_digest
from tryon.cli import main as cli_main
from tryon.cloth_ae import ClothEncoder, bce_loss, evaluate_reconstruction, load_autoencoder, train_autoencoder
from tryon.config import GeneratorConfig, TrainConfig, VtonConfig, default_size_ranges
from tryon.data import load_split
from tryon.metrics import evaluate, f1, format_table, iou
from tryon.synthgen import (
    ClothType,
    HumanAttributes,
    build_dataset,
    drape,
    generate_human_mask,
    measure_length_px,
    read_manifest,
    sample_attributes,
)
from tryon.training import freeze

SEED = 0
TRAIN_RES = 128
ABS_TOL = 1e-6
GRAD_RTOL = 1e-4


# -- criterion 1: loss oracles ---------------------------------------------------

def _grad_check(fn, x):
    t = torch.from_numpy(np.array(x, dtype=np.float64)).requires_grad_(True)
    fn(t).backward()
    numeric = central_difference(lambda a: fn(torch.from_numpy(a)).item(), x)
    return relative_error(t.grad.numpy(), numeric)


def test_criterion_1_loss_oracles(acceptance):
    rng = np.random.default_rng(1)
    p = rng.uniform(0.05, 0.95, (4, 4))
    q = (rng.random((4, 4)) > 0.5).astype(float)
    p4, q4 = p.reshape(1, 1, 4, 4), q.reshape(1, 1, 4, 4)
    probs = rng.dirichlet(np.ones(4), size=3)
    types = np.array([0, 2, 3])
    sp, st = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))

    values = {
        "bce": (bce_loss(torch.tensor(p), torch.tensor(q)).item(), bce_scalar(p, q)),
        "bce_2x2": (bce_loss(torch.tensor([[0.9, 0.1], [0.8, 0.2]], dtype=torch.float64),
                             torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=torch.float64)).item(),
                    -(2 * math.log(0.9) + 2 * math.log(0.8)) / 4),
        "dice": (dice_loss(torch.tensor(p4), torch.tensor(q4)).item(), dice_scalar(p4, q4)),
        "ce": (cross_entropy(torch.tensor(probs), torch.tensor(types)).item(), ce_scalar(probs, types)),
        "mae": (mean_absolute_error(torch.tensor(sp), torch.tensor(st)).item(), mae_scalar(sp, st)),
        "ac_loss": (ac_loss(torch.tensor(probs), torch.tensor(sp), torch.tensor(types), torch.tensor(st), 0.5).item(),
                    ce_scalar(probs, types) + 0.5 * mae_scalar(sp, st)),
        "ac_loss_example": (ac_loss(torch.tensor([[math.exp(-1), 1 - math.exp(-1), 0.0, 0.0]], dtype=torch.float64),
                                    torch.tensor([[100.0, 70.0, 20.0]], dtype=torch.float64), torch.tensor([0]),
                                    torch.tensor([[96.0, 72.0, 18.0]], dtype=torch.float64), 0.5).item(),
                            1.0 + 0.5 * 8 / 3),
    }

    torch.manual_seed(0)
    clf = freeze(AttributeClassifier().double())
    pred = rng.uniform(0.05, 0.95, (1, 2, 16, 16))
    target = torch.tensor((rng.random((1, 2, 16, 16)) > 0.5).astype(float))
    human = torch.tensor(rng.random((1, 2)))
    sizes = torch.tensor(rng.random((1, 3)))
    t1 = torch.tensor([1])
    parts = vton_loss(torch.tensor(pred), target, t1, sizes, human, clf)[1]
    with torch.no_grad():
        cp, cs = clf(torch.tensor(pred), human)
    values["vton_loss"] = (vton_loss(torch.tensor(pred), target, t1, sizes, human, clf)[0].item(),
                           dice_scalar(pred, target.numpy()) + 0.1 * ce_scalar(cp.numpy(), [1])
                           + 0.1 * mae_scalar(cs.numpy(), sizes.numpy()))
    abs_errs = {k: abs(a - b) for k, (a, b) in values.items()}

    grads = {
        "bce": _grad_check(lambda x: bce_loss(x, torch.tensor(q)), p),
        "dice": _grad_check(lambda x: dice_loss(x, torch.tensor(q4)), p4),
        "ac_loss_logits": _grad_check(
            lambda x: ac_loss(torch.softmax(x, 1), torch.tensor(sp), torch.tensor(types), torch.tensor(st)),
            rng.normal(size=(3, 4))),
        "ac_loss_sizes": _grad_check(
            lambda x: ac_loss(torch.tensor(probs), x, torch.tensor(types), torch.tensor(st)), sp),
        "vton_loss": _grad_check(lambda x: vton_loss(x, target, t1, sizes, human, clf)[0], pred),
    }
    ok = max(abs_errs.values()) <= ABS_TOL and max(grads.values()) <= GRAD_RTOL and parts["ce"] > 0
    acceptance(1, ok, f"max |value - oracle| = {max(abs_errs.values()):.2e} (tol {ABS_TOL:g}); "
                      f"max grad rel err = {max(grads.values()):.2e} (tol {GRAD_RTOL:g})")
    assert ok, (abs_errs, grads)


# -- criterion 2: shape and normalization invariants ---------------------------

def test_criterion_2_shapes(acceptance):
    problems = []
    enc = ClothEncoder().eval()
    clf = AttributeClassifier().eval()
    with torch.no_grad():
        for res in (64, 128, 256):
            z = enc(torch.rand(2, 1, res, res))
            if z.shape != (2, 256, res // 16, res // 16):
                problems.append(f"encoder {res}: {tuple(z.shape)}")
            probs = classify_type(clf, clf.features(torch.rand(4, 2, res, res)))
            if (probs.sum(1) - 1).abs().max() > 1e-6:
                problems.append(f"type distribution {res}")
            gen = TryOnGenerator(res).eval()
            out = gen(torch.rand(2, 1, res, res), torch.randn(2, 256, res // 16, res // 16), torch.rand(2, 9))
            if out.shape != (2, 2, res, res) or out.min() < 0 or out.max() > 1:
                problems.append(f"generator {res}")
    acceptance(2, not problems, "encoder (res/16)^2 x 256, softmax sums to 1, generator in [0,1] at 64/128/256"
               if not problems else "; ".join(problems))
    assert not problems


# -- criterion 3: metric identities ----------------------------------------------

def test_criterion_3_metric_identity(acceptance):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        shape = tuple(rng.integers(1, 33, 2))
        density = rng.uniform(0, 1, 2)
        p = rng.random(shape) < density[0]
        t = rng.random(shape) < density[1]
        i = iou(p, t)
        worst = max(worst, abs(f1(p, t) - 2 * i / (1 + i)))
    ok = worst <= 1e-12
    acceptance(3, ok, f"max |F1 - 2 IoU/(1+IoU)| over 1000 pairs = {worst:.1e} (tol 1e-12)")
    assert ok


# -- criterion 4: generator determinism and monotone length ---------------------

def test_criterion_4_generator(acceptance, tmp_path, capsys):
    args = ["gen-data", "--n", "16", "--seed", "7", "--resolution", "256"]
    assert cli_main([*args, "--out", str(tmp_path / "a")]) == 0
    assert cli_main([*args, "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    identical = files_a == files_b and all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files_a)

    rng = np.random.default_rng(4)
    ranges = default_size_ranges()
    failures = 0
    for k in range(50):
        kind = ClothType(int(rng.integers(4)))
        human = HumanAttributes(float(rng.uniform(140, 200)), float(rng.uniform(40, 120)))
        base = sample_attributes(kind, int(rng.integers(1 << 30)))
        lo, hi = ranges[kind.label]["total_length"]
        lengths = np.arange(lo, hi + 1e-9, 5.0)
        for res in (128, 256):
            user = generate_human_mask(human, res)
            measured = [measure_length_px(drape(user, dataclasses.replace(base, total_length=float(l)), human).cloth)
                        for l in lengths]
            if not all(b > a for a, b in zip(measured, measured[1:])):
                failures += 1
    ok = identical and failures == 0
    acceptance(4, ok, f"gen-data byte-identical: {identical}; 50 (human, type) pairs x 5 cm steps at 128 and 256 px, "
                      f"non-increasing sweeps: {failures}")
    assert ok


# -- criteria 5-9: desk-scale training ------------------------------------------

def _cached(path: Path, stage: str, train):
    if path.is_file():
        return Checkpoint.load(path, expect_stage=stage)
    ckpt = train()
    ckpt.save(path)
    return ckpt


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    root = Path(os.environ.get("TRYON_ACCEPTANCE_DIR") or tmp_path_factory.mktemp("acceptance"))
    root.mkdir(parents=True, exist_ok=True)
    data_dir = root / "data"
    if (data_dir / "manifest.jsonl").is_file():
        manifest = read_manifest(data_dir)
    else:
        manifest = build_dataset(GeneratorConfig(), SEED, data_dir)
    stage1 = TrainConfig(seed=SEED, resolution=TRAIN_RES)
    ae = _cached(root / "ae.pt", "ae", lambda: train_autoencoder(manifest, stage1))
    ac = _cached(root / "ac.pt", "ac", lambda: train_classifier(manifest, stage1))
    vcfg = VtonConfig(seed=SEED, resolution=TRAIN_RES, ae_checkpoint=str(root / "ae.pt"),
                      ac_checkpoint=str(root / "ac.pt"))
    with_ac = _cached(root / "vton.pt", "vton", lambda: train_agvton(manifest, vcfg))
    without_ac = _cached(root / "vton_noac.pt", "vton", lambda: ablate_without_classifier(manifest, vcfg))
    reports = {
        "with": evaluate(with_ac, manifest, "val", label="w/ AC"),
        "without": evaluate(without_ac, manifest, "val", label="w/o AC"),
    }
    return {"root": root, "manifest": manifest, "ae": ae, "ac": ac, "with": with_ac, "without": without_ac,
            "reports": reports}


@pytest.mark.slow
def test_criterion_5_stage_one(acceptance, desk_run):
    n_train = len(desk_run["manifest"].split("train"))
    rec = evaluate_reconstruction(desk_run["ae"], desk_run["manifest"], "val")
    clf = evaluate_classifier(desk_run["ac"], desk_run["manifest"], "val")
    mae = clf["size_mae_cm"]
    ok = n_train == 512 and rec["iou"] >= 0.95 and clf["type_accuracy"] >= 0.95 and max(mae.values()) <= 3.0
    acceptance(5, ok, f"{n_train} train samples; AE held-out IoU {rec['iou']:.4f} (>= 0.95); "
                      f"type accuracy {clf['type_accuracy']:.4f} (>= 0.95); size MAE cm "
                      + ", ".join(f"{k} {v:.2f}" for k, v in mae.items()) + " (each <= 3)")
    assert ok


@pytest.mark.slow
def test_criterion_6_stage_two(acceptance, desk_run):
    r = desk_run["reports"]["with"]
    ok = r.f1 >= 0.90 and r.iou >= 0.85 and r.avg_length_error_px <= 6.0
    acceptance(6, ok, f"held-out F1 {r.f1:.4f} (>= 0.90), IoU {r.iou:.4f} (>= 0.85), "
                      f"length error {r.avg_length_error_px:.3f} px at {r.resolution} px (<= 6)")
    assert ok


@pytest.mark.slow
def test_criterion_7_ablation_order(acceptance, desk_run):
    w, wo = desk_run["reports"]["with"], desk_run["reports"]["without"]
    ok = w.f1 >= wo.f1 and w.iou >= wo.iou and w.avg_length_error_px <= wo.avg_length_error_px
    table = format_table([w, wo]).splitlines()
    acceptance(7, ok, f"w/ AC F1 {w.f1:.4f} IoU {w.iou:.4f} len {w.avg_length_error_px:.3f}px vs "
                      f"w/o AC F1 {wo.f1:.4f} IoU {wo.iou:.4f} len {wo.avg_length_error_px:.3f}px")
    print("\n".join(table))
    assert ok


SWEEP = {"S": 60.0, "M": 70.0, "L": 80.0, "XL": 90.0}


@pytest.mark.slow
def test_criterion_8_size_control(acceptance, desk_run):
    """Sweep total_length over S/M/L/XL with the user mask, cloth mask and other attributes fixed."""
    model = load_vton(desk_run["with"])
    data = load_split(desk_run["manifest"], "val", TRAIN_RES)
    results = []
    for i, sid in enumerate(data.ids):
        cloth, human = data.cloth_attrs[i], data.human_attrs[i]
        if cloth.cloth_type is not ClothType.T_SHIRT:
            continue
        user, cloth_mask = data.user[i, 0].numpy(), data.cloth[i, 0].numpy()
        lengths = [measure_length_px(synthesize(model, user, cloth_mask,
                                                dataclasses.replace(cloth, total_length=cm), human).cloth)
                   for cm in SWEEP.values()]
        monotone = all(b >= a for a, b in zip(lengths, lengths[1:]))
        results.append((sid, lengths, monotone and lengths[-1] - lengths[0] >= 10))
    passed = sum(ok for _, _, ok in results)
    spreads = [l[-1] - l[0] for _, l, _ in results]
    ok = bool(results) and passed == len(results)
    acceptance(8, ok, f"{passed}/{len(results)} held-out t-shirt subjects non-decreasing with S->XL spread >= 10 px; "
                      f"spread px min {min(spreads)} median {int(np.median(spreads))} "
                      f"(first subject {results[0][0]}: {results[0][1]})")
    assert ok


@pytest.mark.slow
def test_criterion_9_frozen_modules(acceptance, desk_run):
    ae_digest = weights_digest(load_autoencoder(desk_run["ae"]).encoder.state_dict())
    ac_digest = weights_digest(load_classifier(desk_run["ac"])[0].state_dict())
    checks = []
    for key in ("with", "without"):
        ck = desk_run[key]
        checks.append(ck.metadata["frozen_digests"] == {"ae": ae_digest, "ac": ac_digest})
        checks.append(weights_digest(ck.frozen["ae_encoder"]) == ae_digest)
        checks.append(weights_digest(ck.frozen["ac"]) == ac_digest)
    ok = all(checks)
    acceptance(9, ok, f"AE {ae_digest[:12]} and classifier {ac_digest[:12]} digests identical before/after "
                      f"both try-on runs: {ok}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
