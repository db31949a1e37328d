"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately loop-based and dictionary-based so it
shares no code path with the library implementations it checks.
"""
from __future__ import annotations

import math

import numpy as np


def lama_loops(tensor: np.ndarray, order: str, step1: str, step2: str) -> np.ndarray:
    """Aggregate a (L, H, n, n) stack one scalar at a time."""
    layers, heads, n, _ = tensor.shape

    def combine(values: list[float], step: str) -> float:
        return max(values) if step == "max" else sum(values)

    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            if order == "hl":
                per_layer = [
                    combine([tensor[l, h, i, j] for h in range(heads)], step1)
                    for l in range(layers)
                ]
                out[i, j] = combine(per_layer, step2)
            else:
                per_head = [
                    combine([tensor[l, h, i, j] for l in range(layers)], step1)
                    for h in range(heads)
                ]
                out[i, j] = combine(per_head, step2)
    return out


def lava_loops(matrix: np.ndarray, step3: str) -> np.ndarray:
    n = matrix.shape[0]
    out = np.empty(n)
    for i in range(n):
        row = [matrix[i, j] for j in range(n)]
        out[i] = max(row) if step3 == "max" else sum(row)
    return out


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    out = np.empty_like(logits, dtype=float)
    for i in range(logits.shape[0]):
        row = [math.exp(v) for v in logits[i]]
        total = sum(row)
        out[i] = [v / total for v in row]
    return out


def abstraction_reference(values, lava, t1, t2):
    """Re-derive the kept points with itertools-free grouping logic."""
    n = len(values)
    kinds = []
    for a in lava:
        if a > t1:
            kinds.append("H")
        elif a > t2:
            kinds.append("M")
        else:
            kinds.append("D")
    kept = []
    i = 0
    while i < n:
        if kinds[i] == "H":
            kept.append((i, float(values[i])))
            i += 1
        elif kinds[i] == "M":
            j = i
            while j + 1 < n and kinds[j + 1] == "M":
                j += 1
            run_values = sorted(float(values[k]) for k in range(i, j + 1))
            kept.append(((i + j) // 2, run_values[(len(run_values) - 1) // 2]))
            i = j + 1
        else:
            i += 1
    return kept


def apen_reference(x, m, r):
    """Direct transcription of the approximate-entropy formulas."""
    x = list(map(float, x))
    n = len(x)

    def phi(order):
        count = n - order + 1
        templates = [x[i : i + order] for i in range(count)]
        total = 0.0
        for i in range(count):
            matches = 0
            for j in range(count):
                dist = max(abs(a - b) for a, b in zip(templates[i], templates[j]))
                if dist < r:
                    matches += 1
            total += math.log(matches / count)
        return total / count

    return phi(m) - phi(m + 1)


def sampen_reference(x, m, r):
    """Direct transcription of the sample-entropy formulas.

    Returns None when no matches exist at either template length.
    """
    x = list(map(float, x))
    n = len(x)
    count = n - m

    def matches(order):
        templates = [x[i : i + order] for i in range(count)]
        total = 0
        for i in range(count):
            for j in range(count):
                if i == j:
                    continue
                dist = max(abs(a - b) for a, b in zip(templates[i], templates[j]))
                if dist < r:
                    total += 1
        return total

    b = matches(m)
    a = matches(m + 1)
    if a == 0 or b == 0:
        return None
    return -math.log(a / b)


def gcr_build_loops(samples, variant, symbol_count, classes):
    """Dictionary-of-matrices build following the aggregation pseudocode.

    samples: list of (symbols, matrix, label). Returns (fcam, ccam, gtm)
    where fcam[c][u][v] is an n x n array, ccam[c][v] likewise, and
    gtm[c][v] is the gva reduction of ccam[c][v] over its row axis.
    """
    n = len(samples[0][0])
    lcount = {c: 0 for c in classes}
    for _, _, label in samples:
        lcount[label] += 1
    tcount = len(samples)

    threshold = None
    if variant.threshold_factor is not None:
        per_sample_means = []
        for _, matrix, _ in samples:
            total = 0.0
            for i in range(n):
                for j in range(n):
                    total += matrix[i][j]
            per_sample_means.append(total / (n * n))
        threshold = variant.threshold_factor * (sum(per_sample_means) / len(per_sample_means))

    fcam = {
        c: {u: {v: np.zeros((n, n)) for v in range(symbol_count)} for u in range(symbol_count)}
        for c in classes
    }
    counts = {
        c: {u: {v: np.zeros((n, n)) for v in range(symbol_count)} for u in range(symbol_count)}
        for c in classes
    }

    for symbols, matrix, label in samples:
        for i in range(n):
            for j in range(n):
                a = float(matrix[i][j])
                if threshold is not None and a < threshold:
                    continue
                u, v = int(symbols[i]), int(symbols[j])
                if variant.penalty == "none":
                    fcam[label][u][v][i][j] += a
                    counts[label][u][v][i][j] += 1
                elif variant.penalty == "counting":
                    sub = a / lcount[label]
                    fcam[label][u][v][i][j] += variant.alpha * (len(classes) + 1) * sub
                    counts[label][u][v][i][j] += 1
                    for d in classes:
                        if d == label:
                            continue
                        fcam[d][u][v][i][j] -= sub
                        counts[d][u][v][i][j] += 1
                else:
                    e = lcount[label] / tcount
                    weight = max(-e * math.log(e), variant.entropy_eps)
                    fcam[label][u][v][i][j] += (
                        variant.alpha * (len(classes) + 1) * a / weight
                    )
                    counts[label][u][v][i][j] += 1
                    for d in classes:
                        if d == label:
                            continue
                        fcam[d][u][v][i][j] -= a * weight
                        counts[d][u][v][i][j] += 1

    if variant.gsa == "ravg":
        for c in classes:
            for u in range(symbol_count):
                for v in range(symbol_count):
                    cell_counts = counts[c][u][v]
                    divided = np.zeros((n, n))
                    for i in range(n):
                        for j in range(n):
                            if cell_counts[i][j] > 0:
                                divided[i][j] = fcam[c][u][v][i][j] / cell_counts[i][j]
                    fcam[c][u][v] = divided

    ccam = {c: {v: np.zeros((n, n)) for v in range(symbol_count)} for c in classes}
    for c in classes:
        for v in range(symbol_count):
            for u in range(symbol_count):
                ccam[c][v] = ccam[c][v] + fcam[c][u][v]

    def reduce_rows(matrix, mode):
        cols = []
        for j in range(n):
            column = [float(matrix[i][j]) for i in range(n)]
            if mode == "max":
                cols.append(max(column))
            elif mode == "avg":
                total = 0.0
                for value in column:
                    total += value
                cols.append(total / n)
            else:
                ordered = sorted(column)
                mid = n // 2
                cols.append(
                    ordered[mid] if n % 2 == 1 else (ordered[mid - 1] + ordered[mid]) / 2
                )
        return np.asarray(cols)

    gva = variant.gva or "avg"
    gtm = {c: {v: reduce_rows(ccam[c][v], gva) for v in range(symbol_count)} for c in classes}
    return fcam, ccam, gtm


def gcr_classify_loops(fcam, classes, symbol_count, n, symbols):
    """Score one input against the dictionary build, per the lookup rules."""
    max_scores = {}
    for c in classes:
        total = 0.0
        for i in range(n):
            for j in range(n):
                total += max(
                    fcam[c][u][v][i][j]
                    for u in range(symbol_count)
                    for v in range(symbol_count)
                )
        max_scores[c] = total
    scores = {}
    for c in classes:
        value = 0.0
        for i in range(n):
            for j in range(n):
                value += fcam[c][int(symbols[i])][int(symbols[j])][i][j]
        scores[c] = value / max_scores[c] if max_scores[c] > 1e-12 else float("-inf")
    return scores


def gtm_classify_loops(gtm, classes, symbol_count, n, symbols):
    scores = {}
    for c in classes:
        max_score = 0.0
        for i in range(n):
            max_score += max(gtm[c][v][i] for v in range(symbol_count))
        value = 0.0
        for i in range(n):
            value += gtm[c][int(symbols[i])][i]
        scores[c] = value / max_score if max_score > 1e-12 else float("-inf")
    return scores


def occupancy_counts(symbol_rows, labels, symbol_count, classes):
    """Per-class, per-position symbol occurrence counts."""
    n = len(symbol_rows[0])
    counts = {c: np.zeros((symbol_count, n)) for c in classes}
    for symbols, label in zip(symbol_rows, labels):
        for i, symbol in enumerate(symbols):
            counts[label][int(symbol), i] += 1
    return counts
