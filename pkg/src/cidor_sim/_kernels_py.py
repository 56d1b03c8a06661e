"""numpy versions of the per-tick kernels, used when the extension is missing."""
import numpy as np


def positions(t, seg, out):
    dt = t - seg[:, 0]
    out[:, 0] = seg[:, 1] + seg[:, 3] * dt
    out[:, 1] = seg[:, 2] + seg[:, 4] * dt


def contact_changes(xy, radius, state):
    """Flip ``state`` to the pairs within ``radius``; return the flipped pairs."""
    diff = xy[:, None, :] - xy[None, :, :]
    within = np.einsum("ijk,ijk->ij", diff, diff) <= radius * radius
    np.fill_diagonal(within, False)
    changed = np.triu(within != state.astype(bool), 1)
    i, j = np.nonzero(changed)
    up = within[i, j]
    state[i, j] = up
    state[j, i] = up
    return np.stack([i, j, up.astype(np.intp)], axis=1).astype(np.intp)
