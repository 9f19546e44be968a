"""Pure-Python routing kernels: the fallback twin of the compiled core.

Every method here mirrors _speedups.pyx operation for operation. Float
expressions are written in the exact evaluation order of the C code
(sqrt(dx*dx + dy*dy), libm atan2/fmod) so both backends produce
bit-identical decisions. Keep the two files in sync when changing either.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 6.283185307179586
HALF_PI = 1.5707963267948966
PI = 3.141592653589793
ANGLE_EPS = 1e-9
MIN_ARC_WIDTH = 2e-6

STATUS_DELIVERED = 0
STATUS_BLOCKED = 1
STATUS_CAP = 2

POLICY_GREEDY = 0
POLICY_DEFLECTION = 1
POLICY_OPTIMIZED = 2


def _norm(a):
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


def _circ(a, b):
    d = _norm(b - a)
    return d if d <= PI else TWO_PI - d


class RunCore:
    """Array-backed decision kernels over one static topology.

    The sector table rows hold each node's currently advertised (published)
    blocked sectors; the owner rewrites a row and bumps the version counter
    whenever that node backtracks. k-hop neighborhoods are an optional CSR
    set only when the optimized policy needs them.
    """

    def __init__(self, xs, ys, indptr, indices):
        self.xs = np.ascontiguousarray(xs, dtype=np.float64)
        self.ys = np.ascontiguousarray(ys, dtype=np.float64)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int32)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.n = len(self.xs)
        self.version = 1
        self.counts = None
        self.amin = None
        self.amax = None
        self.dmin = None
        self.kh_indptr = None
        self.kh_ids = None
        # scratch
        self._mask = np.zeros(self.n, dtype=np.uint8)
        self._membuf = np.empty(self.n, dtype=np.int32)
        self._angbuf = np.empty(self.n, dtype=np.float64)
        self._queue = np.empty(self.n, dtype=np.int32)
        self._depth = np.empty(self.n, dtype=np.int32)
        # per-node forbidden-sector cache, valid while version and dest match
        self._fs_ver = np.zeros(self.n, dtype=np.int64)
        self._fs_dx = np.empty(self.n, dtype=np.float64)
        self._fs_dy = np.empty(self.n, dtype=np.float64)
        self._fs_found = np.zeros(self.n, dtype=np.int8)
        self._fs_val = np.empty((self.n, 3), dtype=np.float64)

    def set_sector_table(self, counts, amin, amax, dmin):
        self.counts = counts
        self.amin = amin
        self.amax = amax
        self.dmin = dmin

    def set_khood(self, kh_indptr, kh_ids):
        self.kh_indptr = kh_indptr
        self.kh_ids = kh_ids

    def bump_version(self):
        self.version += 1

    # ------------------------------------------------------------- graph ops

    def bfs_fill(self, src, out):
        """Hop counts from src into out (int32, -1 unreachable)."""
        out[:] = -1
        out[src] = 0
        q = self._queue
        q[0] = src
        head, tail = 0, 1
        indptr, indices = self.indptr, self.indices
        while head < tail:
            u = q[head]
            head += 1
            du = out[u] + 1
            for j in range(indptr[u], indptr[u + 1]):
                v = indices[j]
                if out[v] < 0:
                    out[v] = du
                    q[tail] = v
                    tail += 1

    def khood_collect(self, src, k, out_ids):
        """Ids within 1..k hops of src, ascending. Returns the count."""
        depth = self._depth
        depth[:] = -1
        depth[src] = 0
        q = self._queue
        q[0] = src
        head, tail = 0, 1
        indptr, indices = self.indptr, self.indices
        while head < tail:
            u = q[head]
            head += 1
            du = depth[u]
            if du >= k:
                continue
            for j in range(indptr[u], indptr[u + 1]):
                v = indices[j]
                if depth[v] < 0:
                    depth[v] = du + 1
                    q[tail] = v
                    tail += 1
        m = 0
        for v in range(self.n):
            if depth[v] > 0:
                out_ids[m] = v
                m += 1
        return m

    # -------------------------------------------------------- sector queries

    def _node_blocked_for(self, v, px, py):
        """Published-sector containment test, mirroring sector_contains."""
        cnt = self.counts[v]
        if cnt == 0:
            return False
        dx = px - self.xs[v]
        dy = py - self.ys[v]
        d = math.sqrt(dx * dx + dy * dy)
        if d == 0.0:
            return False
        ang = -1.0
        for j in range(cnt):
            if d < self.dmin[v, j]:
                continue
            a0 = self.amin[v, j]
            a1 = self.amax[v, j]
            if a0 == a1:
                return True
            if ang < 0.0:
                ang = _norm(math.atan2(dy, dx))
            da = _norm(ang - a0)
            width = _norm(a1 - a0)
            if da <= width + ANGLE_EPS or da >= TWO_PI - ANGLE_EPS:
                return True
        return False

    # ------------------------------------------------------ forbidden sector

    def forbidden_sector(self, u, dest_x, dest_y, guard, out3, out_members):
        """Best-aligned blocked node, its blocked connected set, covering
        arc with guard. Writes (amin, amax, dmin) to out3 and member ids to
        out_members; returns the member count (0 = no qualifying node)."""
        ux = self.xs[u]
        uy = self.ys[u]
        ddx = dest_x - ux
        ddy = dest_y - uy
        if ddx == 0.0 and ddy == 0.0:
            return 0
        theta_d = _norm(math.atan2(ddy, ddx))

        kh_lo = self.kh_indptr[u]
        kh_hi = self.kh_indptr[u + 1]
        best = -1
        best_ang = 1e300
        for idx in range(kh_lo, kh_hi):
            b = self.kh_ids[idx]
            if self.counts[b] == 0:
                continue
            bx = self.xs[b]
            by = self.ys[b]
            if bx == ux and by == uy:
                continue
            if not self._node_blocked_for(b, dest_x, dest_y):
                continue
            ang = _circ(theta_d, _norm(math.atan2(by - uy, bx - ux)))
            if ang < best_ang:  # ascending ids: strict keeps the smallest id
                best = b
                best_ang = ang
        if best < 0:
            return 0

        mask = self._mask
        for idx in range(kh_lo, kh_hi):
            mask[self.kh_ids[idx]] = 1
        membuf = self._membuf
        membuf[0] = best
        mask[best] = 2
        n_members = 1
        head = 0
        indptr, indices = self.indptr, self.indices
        while head < n_members:
            m = membuf[head]
            head += 1
            for j in range(indptr[m], indptr[m + 1]):
                v = indices[j]
                if mask[v] == 1 and self.counts[v] > 0:
                    mask[v] = 2
                    membuf[n_members] = v
                    n_members += 1
        for idx in range(kh_lo, kh_hi):
            mask[self.kh_ids[idx]] = 0

        angbuf = self._angbuf
        d_min = 1e300
        for i in range(n_members):
            b = membuf[i]
            out_members[i] = b
            bx = self.xs[b] - ux
            by = self.ys[b] - uy
            angbuf[i] = _norm(math.atan2(by, bx))
            d = math.sqrt(bx * bx + by * by)
            if d < d_min:
                d_min = d

        # insertion sort: member sets are small
        for i in range(1, n_members):
            key = angbuf[i]
            j = i - 1
            while j >= 0 and angbuf[j] > key:
                angbuf[j + 1] = angbuf[j]
                j -= 1
            angbuf[j + 1] = key

        if n_members == 1:
            start = angbuf[0]
            width = 0.0
        else:
            best_gap = -1.0
            best_idx = 0
            for i in range(n_members):
                if i + 1 < n_members:
                    gap = angbuf[i + 1] - angbuf[i]
                else:
                    gap = TWO_PI - angbuf[n_members - 1] + angbuf[0]
                if gap > best_gap:
                    best_gap = gap
                    best_idx = i
            start = angbuf[(best_idx + 1) % n_members]
            width = TWO_PI - best_gap

        start -= guard
        width += 2.0 * guard
        if width < MIN_ARC_WIDTH:
            center = start + width / 2.0
            start = center - MIN_ARC_WIDTH / 2.0
            width = MIN_ARC_WIDTH
        if width >= TWO_PI:
            out3[0] = 0.0
            out3[1] = 0.0
        else:
            a0 = _norm(start)
            a1 = _norm(start + width)
            if a0 == a1:  # rounding collapsed the gap: canonical full circle
                a0 = 0.0
                a1 = 0.0
            out3[0] = a0
            out3[1] = a1
        out3[2] = d_min
        return n_members

    def _fs_cached(self, u, dest_x, dest_y, guard, out3):
        if (
            self._fs_ver[u] == self.version
            and self._fs_dx[u] == dest_x
            and self._fs_dy[u] == dest_y
        ):
            if self._fs_found[u] == 0:
                return False
            out3[0] = self._fs_val[u, 0]
            out3[1] = self._fs_val[u, 1]
            out3[2] = self._fs_val[u, 2]
            return True
        m = self.forbidden_sector(u, dest_x, dest_y, guard, out3, self._membuf)
        self._fs_ver[u] = self.version
        self._fs_dx[u] = dest_x
        self._fs_dy[u] = dest_y
        self._fs_found[u] = 1 if m > 0 else 0
        if m > 0:
            self._fs_val[u, 0] = out3[0]
            self._fs_val[u, 1] = out3[1]
            self._fs_val[u, 2] = out3[2]
        return m > 0

    # -------------------------------------------------------------- deciding

    def _decide(self, policy, u, dest_x, dest_y, guard, fs_out):
        """Next-hop id, or -1 when no eligible neighbor exists."""
        ux = self.xs[u]
        uy = self.ys[u]
        sdx = dest_x - ux
        sdy = dest_y - uy
        d_self = math.sqrt(sdx * sdx + sdy * sdy)

        has_fs = False
        if policy == POLICY_OPTIMIZED:
            has_fs = self._fs_cached(u, dest_x, dest_y, guard, fs_out)
            f_amin = fs_out[0]
            f_amax = fs_out[1]
            f_dmin = fs_out[2]

        best = -1
        best_d = d_self
        best_in = -1
        best_in_ang = 1e300
        for j in range(self.indptr[u], self.indptr[u + 1]):
            v = self.indices[j]
            vdx = dest_x - self.xs[v]
            vdy = dest_y - self.ys[v]
            d = math.sqrt(vdx * vdx + vdy * vdy)
            if d >= d_self:
                continue
            if policy != POLICY_GREEDY and self._node_blocked_for(v, dest_x, dest_y):
                continue
            if has_fs:
                # is this neighbor inside the forbidden sector?
                rdx = self.xs[v] - ux
                rdy = self.ys[v] - uy
                r = math.sqrt(rdx * rdx + rdy * rdy)
                inside = False
                if r != 0.0 and r >= f_dmin:
                    a = _norm(math.atan2(rdy, rdx))
                    if f_amin == f_amax:
                        inside = True
                    else:
                        da = _norm(a - f_amin)
                        width = _norm(f_amax - f_amin)
                        inside = da <= width + ANGLE_EPS or da >= TWO_PI - ANGLE_EPS
                if inside:
                    if best < 0:  # only relevant while no outside candidate
                        ang = min(_circ(a, f_amin), _circ(a, f_amax))
                        if ang < best_in_ang:
                            best_in = v
                            best_in_ang = ang
                    continue
            if d < best_d:  # ascending ids: strict keeps the smallest id
                best = v
                best_d = d
        if best < 0 and has_fs:
            return best_in
        return best

    def walk(self, policy, start, dest_id, dest_x, dest_y, budget, guard, chain_out):
        """Chained forward moves until delivery, block, or budget exhaustion.

        Returns (status, chain length); chain_out receives the visited ids.
        """
        fs_out = np.empty(3, dtype=np.float64)
        u = start
        length = 0
        used = 0
        while True:
            if u == dest_id:
                return STATUS_DELIVERED, length
            if used >= budget:
                return STATUS_CAP, length
            nxt = self._decide(policy, u, dest_x, dest_y, guard, fs_out)
            if nxt < 0:
                return STATUS_BLOCKED, length
            chain_out[length] = nxt
            length += 1
            used += 1
            u = nxt
