"""Writes stub 768-dim vectors (hashed bag of words) for the demo texts."""
import hashlib, json, math, re, sys

DIM = 768
texts = [l.strip() for l in open(sys.argv[1]) if l.strip()]

def key(t):
    return hashlib.sha256(" ".join(t.lower().split()).encode()).hexdigest()

def vec(t):
    v = [0.0] * DIM
    for tok in re.split(r"[^0-9a-z]+", t.lower()):
        if tok:
            h = hashlib.sha256(tok.encode()).digest()
            v[int.from_bytes(h[:4], "little") % DIM] += 1.0 if h[4] & 1 else -1.0
    n = math.sqrt(sum(x * x for x in v)) or 1.0
    return [round(x / n, 6) for x in v]

with open(sys.argv[2], "w") as out:
    for t in texts:
        out.write(json.dumps({"key": key(t), "vector": vec(t)}) + "\n")
