#!/usr/bin/env python3
"""Independent recomputation of a safety report from a prediction-record file.

Reads JSON-lines prediction records, rebuilds the per-class and overall
correct-vs-misclassified analysis with numpy's eigendecomposition, and writes
a report JSON with the same schema as the `qsafeml monitor` command. Used to
generate the golden report fixture the acceptance suite compares against:

    python3 scripts/report_oracle.py records.jsonl golden_report.json s1
"""

import json
import math
import sys

import numpy as np

ZERO_CUT = 1e-12
SUPPORT_TOL = 1e-9
THRESHOLD = 0.5
SQRT2 = math.sqrt(2.0)


def record_density(record):
    state = record["state"]
    if state["type"] == "statevector":
        amps = np.array([complex(re, im) for re, im in state["amplitudes"]])
        return np.outer(amps, amps.conj())
    if state["type"] == "distribution":
        return np.diag(np.array(state["probs"], dtype=float)).astype(complex)
    raise ValueError(f"unknown state type {state['type']}")


def aggregate(records):
    acc = None
    for r in records:
        rho = record_density(r)
        acc = rho if acc is None else acc + rho
    rho = acc / len(records)
    return 0.5 * (rho + rho.conj().T)


def sqrtm_psd(m):
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def trace_distance(rho, sigma):
    vals = np.linalg.eigvalsh(rho - sigma)
    return min(max(0.5 * np.abs(vals).sum(), 0.0), 1.0)


def fidelity(rho, sigma):
    s = sqrtm_psd(rho)
    inner = s @ sigma @ s
    inner = 0.5 * (inner + inner.conj().T)
    vals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    f = float(np.sqrt(vals).sum()) ** 2
    return min(max(f, 0.0), 1.0)


def bures(rho, sigma):
    f = fidelity(rho, sigma)
    return math.sqrt(max(2.0 * (1.0 - math.sqrt(f)), 0.0))


def relative_entropy(rho, sigma):
    """Returns (value, support_violation); value may be inf."""
    rvals, rvecs = np.linalg.eigh(rho)
    svals, svecs = np.linalg.eigh(sigma)
    kernel = [j for j, s in enumerate(svals) if s <= ZERO_CUT]
    if kernel:
        for i, r in enumerate(rvals):
            if r <= ZERO_CUT:
                continue
            mass = sum(
                abs(np.vdot(svecs[:, j], rvecs[:, i])) ** 2 for j in kernel
            )
            if mass > SUPPORT_TOL:
                return math.inf, True
    value = sum(r * math.log(r) for r in rvals if r > ZERO_CUT)
    for j, s in enumerate(svals):
        if s <= ZERO_CUT:
            continue
        q = float(np.real(np.vdot(svecs[:, j], rho @ svecs[:, j])))
        value -= q * math.log(s)
    if -1e-9 < value < 0.0:
        value = 0.0
    return value, False


METRICS = ["trace_distance", "fidelity", "bures_distance", "quantum_relative_entropy"]


def normalized(kind, value):
    if kind == "trace_distance":
        return min(max(value, 0.0), 1.0)
    if kind == "fidelity":
        return min(max(1.0 - value, 0.0), 1.0)
    if kind == "bures_distance":
        return min(max(value / SQRT2, 0.0), 1.0)
    if math.isinf(value):
        return 1.0
    return min(max(value, 0.0), 1.0)


def density_data(rho):
    return {
        "dim": rho.shape[0],
        "entries": [[float(z.real), float(z.imag)] for z in rho.flatten()],
    }


def analyze_set(class_label, correct, misclassified):
    result = {}
    if class_label is not None:
        result["class_label"] = class_label
    result["n_correct"] = len(correct)
    result["n_misclassified"] = len(misclassified)
    total = len(correct) + len(misclassified)
    if total > 0:
        result["class_accuracy"] = len(correct) / total
    if correct:
        correct_rho = aggregate(correct)
        result["correct_aggregate"] = density_data(correct_rho)
    if total == 0:
        result["degenerate"] = "no records"
        return result
    if not misclassified:
        result["degenerate"] = "no misclassified samples"
        return result
    if not correct:
        result["degenerate"] = "no correctly classified samples"
        return result

    mis_rho = aggregate(misclassified)
    values = {
        "trace_distance": (trace_distance(correct_rho, mis_rho), False),
        "fidelity": (fidelity(correct_rho, mis_rho), False),
        "bures_distance": (bures(correct_rho, mis_rho), False),
        "quantum_relative_entropy": relative_entropy(correct_rho, mis_rho),
    }
    accuracy = result["class_accuracy"]

    metrics = {}
    norm = {}
    closeness = {}
    flags = {}
    warnings = []
    for kind in METRICS:
        value, violation = values[kind]
        value = float(value)
        metrics[kind] = {
            "value": None if math.isinf(value) else value,
            "support_violation": bool(violation),
        }
        n = float(normalized(kind, value))
        norm[kind] = n
        closeness[kind] = None if math.isinf(value) else abs(n - accuracy)
        flags[kind] = bool(n > THRESHOLD)

    qre, _ = values["quantum_relative_entropy"]
    if math.isinf(qre):
        warnings.append(
            "quantum_relative_entropy is infinite: the compared aggregates have mismatched supports"
        )
    elif qre > 1.0:
        warnings.append(
            f"quantum_relative_entropy exceeds 1 ({qre:.4f}); "
            "large divergences can also indicate malformed states"
        )

    ordered = {}
    if class_label is not None:
        ordered["class_label"] = class_label
    ordered["n_correct"] = result["n_correct"]
    ordered["n_misclassified"] = result["n_misclassified"]
    ordered["class_accuracy"] = accuracy
    ordered["metrics"] = metrics
    ordered["normalized"] = norm
    ordered["closeness"] = closeness
    ordered["flags"] = flags
    if warnings:
        ordered["warnings"] = warnings
    ordered["correct_aggregate"] = result["correct_aggregate"]
    return ordered


def main():
    records_path, out_path, dataset_id = sys.argv[1], sys.argv[2], sys.argv[3]
    with open(records_path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]

    n_classes = max(max(r["true_label"], r["predicted_label"]) for r in records) + 1
    per_class = []
    for c in range(n_classes):
        correct = [
            r
            for r in records
            if r["true_label"] == c and r["predicted_label"] == c
        ]
        mis = [
            r
            for r in records
            if r["true_label"] == c and r["predicted_label"] != c
        ]
        per_class.append(analyze_set(c, correct, mis))

    all_correct = [r for r in records if r["true_label"] == r["predicted_label"]]
    all_mis = [r for r in records if r["true_label"] != r["predicted_label"]]
    overall = analyze_set(None, all_correct, all_mis)

    report = {
        "schema_version": "1",
        "dataset_id": dataset_id,
        "n_records": len(records),
        "n_correct": len(all_correct),
        "model_accuracy": len(all_correct) / len(records),
        "per_class": per_class,
        "overall": overall,
        "config_echo": {
            "thresholds": {k: THRESHOLD for k in METRICS},
            "grouping": "true_label",
            "aggregation": "uniform",
        },
    }
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_path} ({len(records)} records, {n_classes} classes)")


if __name__ == "__main__":
    main()
