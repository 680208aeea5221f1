"""A walk through the discretized model space for a two-edge star graph.

Builds the symbol track, projects a smooth vector onto ``K``, applies the
model resolvent and the wave maps, and shows the decay of the difference of
two paired vectors under the free evolution.

Run with ``python3 demos/model_space.py`` (a few seconds).
"""

import numpy as np

from triple_scatter import corpus, hardy
from triple_scatter.hardy import Grid, SymbolTrack
from triple_scatter.weyl import ExtensionParams, StarGraph

model = StarGraph(2)
ext = ExtensionParams.sqrt2(np.diag([1.0, -1.0]))
ext0 = ext.with_kappa(np.zeros((2, 2)))
z = -1j

for N in (2048, 4096, 8192):
    track = SymbolTrack.from_model(Grid(50.0, N), ext, model)
    v = corpus.rational_corpus(track, ext.kappa, count=1)[0]
    u = hardy.project_K(v)
    r = hardy.model_resolvent(u, ext, model, z)
    resid = hardy.model_norm(r - hardy.compressed_multiplication(v, z)) / hardy.model_norm(u)
    print(f"N={N:5d}  ||P_K v|| = {hardy.model_norm(u):.6f}  "
          f"K-defect {hardy.k_defect(u):.1e}  resolvent residual {resid:.1e}")

track = SymbolTrack.from_model(Grid(50.0, 4096), ext, model)
rng = np.random.default_rng(0)
g_tilde = corpus.rational_seed(track.grid.x, 2, rng)
v0 = corpus.smooth_vector(track, ext0.kappa, g_tilde)
print("\nwave maps applied to a vector smooth for the unperturbed extension:")
for direction in (hardy.W_MINUS_K0, hardy.W_PLUS_K0):
    ratio = hardy.model_norm(hardy.wave_map(direction, v0, ext)) / hardy.model_norm(hardy.project_K(v0))
    print(f"  {direction}: norm ratio {ratio:.4f}")

g = corpus.rational_seed(track.grid.x, 2, rng)
pk, p0 = corpus.paired_vectors(track, ext.kappa, g)
diff = pk.g_tilde - p0.g_tilde
grid = track.grid
print("\n||P_- e^{-ikt} (g_tilde_kappa - g_tilde_0)|| for t = -5, -20, -80:")
for t in (-5, -20, -80):
    value = grid.norm(hardy.riesz_project(np.exp(-1j * grid.x * t)[:, None] * diff, grid, -1))
    print(f"  t={t:4d}: {value:.3e}")
