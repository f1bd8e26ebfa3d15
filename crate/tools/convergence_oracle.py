"""Reference outputs for the convergence detector on three synthetic traces.

Written from the prose definition: 50 equal-width bins over [first, last],
empty bins carry the previous mean forward, centered 5-bin moving average
truncated at the edges, normalized absolute deltas, converged at the first bin
that opens 8 consecutive deltas below 0.01, otherwise still rising when the
last quarter mean exceeds the third quarter mean by more than 3% of the range.
"""
import json
import numpy as np

BINS, WIN, THR, PAT = 50, 5, 0.01, 8


def detect(steps, rewards):
    steps = np.asarray(steps, dtype=np.int64)
    rewards = np.asarray(rewards, dtype=np.float64)
    first, last = int(steps[0]), int(steps[-1])
    width = (last - first) / BINS
    idx = np.minimum(((steps - first) / width).astype(np.int64), BINS - 1)
    means = np.empty(BINS)
    prev = 0.0
    for b in range(BINS):
        sel = rewards[idx == b]
        means[b] = sel.mean() if sel.size else prev
        prev = means[b]
    curve = np.array([means[max(0, i - WIN // 2): i + WIN // 2 + 1].mean() for i in range(BINS)])
    rng = curve.max() - curve.min()
    deltas = np.abs(np.diff(curve)) / rng
    for i in range(len(deltas) - PAT + 1):
        if np.all(deltas[i:i + PAT] < THR):
            return {"status": "converged", "bin": i, "step": first + int(round(i * width))}
    q3 = curve[25:37].mean()
    q4 = curve[37:].mean()
    return {"status": "still_rising" if q4 - q3 > 0.03 * rng else "flat_oscillating", "bin": None, "step": None}


def traces():
    i = np.arange(2000)
    s = i * 500
    yield "saturating", s, 500.0 * (1.0 - np.exp(-s / 150000.0)) + 20.0 * np.sin(0.37 * i)
    yield "rising", s, 0.0004 * s + 5.0 * np.sin(0.11 * i)
    yield "oscillating", s, 100.0 * np.sin(2.0 * np.pi * s / 250000.0)


if __name__ == "__main__":
    print(json.dumps({name: detect(s, r) for name, s, r in traces()}, indent=1))
