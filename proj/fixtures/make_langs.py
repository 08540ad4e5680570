"""Writes langs.jsonl: 5 languages x 2 smoothing settings, 20 four-way
questions each. Every record puts the same mass on its argmax within a group,
so each group's ECE is |accuracy - confidence|; the smoothing=0.1 group sits
halfway between the smoothing=0 confidence (0.9) and the accuracy."""
import json

LANGS = [("de", 12), ("en", 11), ("fr", 10), ("sw", 9), ("yo", 8)]
N, K, CONF0 = 20, 4, 0.9

with open("langs.jsonl", "w") as out:
    for beta in (0.0, 0.1):
        for lang, n_correct in LANGS:
            acc = n_correct / N
            conf = CONF0 if beta == 0.0 else CONF0 - (CONF0 - acc) / 2
            for i in range(N):
                label = i % K
                top = label if i < n_correct else (label + 1) % K
                probs = [(1.0 - conf) / (K - 1)] * K
                probs[top] = conf
                rec = {"id": f"{lang}-{i:02d}", "probs": probs, "label": label,
                       "group": {"model": "toy", "sft_dataset": "base",
                                 "language": lang, "smoothing": beta}}
                out.write(json.dumps(rec, separators=(",", ":")) + "\n")
