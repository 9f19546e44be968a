# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False
"""Compiled routing kernels.

Semantic twin of _pure.py: every expression is evaluated in the same
order on the same IEEE doubles (libm atan2/fmod/sqrt on both sides), so
decisions are bit-identical across backends. Keep the two files in sync.
"""

from libc.math cimport atan2, fmod, sqrt

import numpy as np

cdef double TWO_PI = 6.283185307179586
cdef double HALF_PI = 1.5707963267948966
cdef double PI = 3.141592653589793
cdef double ANGLE_EPS = 1e-9
cdef double MIN_ARC_WIDTH = 2e-6

STATUS_DELIVERED = 0
STATUS_BLOCKED = 1
STATUS_CAP = 2

POLICY_GREEDY = 0
POLICY_DEFLECTION = 1
POLICY_OPTIMIZED = 2

cdef int _ST_DELIVERED = 0
cdef int _ST_BLOCKED = 1
cdef int _ST_CAP = 2

cdef int _P_GREEDY = 0
cdef int _P_OPTIMIZED = 2


cdef inline double _norm(double a) nogil:
    a = fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


cdef inline double _circ(double a, double b) nogil:
    cdef double d = _norm(b - a)
    return d if d <= PI else TWO_PI - d


cdef class RunCore:
    """Array-backed decision kernels over one static topology.

    The sector table rows hold each node's currently advertised (published)
    blocked sectors; the owner rewrites a row and bumps the version counter
    whenever that node backtracks. k-hop neighborhoods are an optional CSR
    set only when the optimized policy needs them.
    """

    cdef double[::1] xs
    cdef double[::1] ys
    cdef int[::1] indptr
    cdef int[::1] indices
    cdef readonly int n
    cdef long long _version
    cdef int[::1] counts
    cdef double[:, ::1] amin
    cdef double[:, ::1] amax
    cdef double[:, ::1] dmin
    cdef bint _table_set
    cdef long long[::1] kh_indptr
    cdef int[::1] kh_ids
    cdef bint _khood_set
    # scratch
    cdef unsigned char[::1] _mask
    cdef int[::1] _membuf
    cdef double[::1] _angbuf
    cdef int[::1] _queue
    cdef int[::1] _depth
    # per-node forbidden-sector cache, valid while version and dest match
    cdef long long[::1] _fs_ver
    cdef double[::1] _fs_dx
    cdef double[::1] _fs_dy
    cdef signed char[::1] _fs_found
    cdef double[:, ::1] _fs_val

    def __init__(self, xs, ys, indptr, indices):
        self.xs = np.ascontiguousarray(xs, dtype=np.float64)
        self.ys = np.ascontiguousarray(ys, dtype=np.float64)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int32)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.n = len(self.xs)
        self._version = 1
        self._table_set = False
        self._khood_set = False
        cdef int n = self.n
        self._mask = np.zeros(n, dtype=np.uint8)
        self._membuf = np.empty(n, dtype=np.int32)
        self._angbuf = np.empty(n, dtype=np.float64)
        self._queue = np.empty(n, dtype=np.int32)
        self._depth = np.empty(n, dtype=np.int32)
        self._fs_ver = np.zeros(n, dtype=np.int64)
        self._fs_dx = np.empty(n, dtype=np.float64)
        self._fs_dy = np.empty(n, dtype=np.float64)
        self._fs_found = np.zeros(n, dtype=np.int8)
        self._fs_val = np.empty((n, 3), dtype=np.float64)

    @property
    def version(self):
        return self._version

    def set_sector_table(self, counts, amin, amax, dmin):
        self.counts = counts
        self.amin = amin
        self.amax = amax
        self.dmin = dmin
        self._table_set = True

    def set_khood(self, kh_indptr, kh_ids):
        self.kh_indptr = np.ascontiguousarray(kh_indptr, dtype=np.int64)
        self.kh_ids = np.ascontiguousarray(kh_ids, dtype=np.int32)
        self._khood_set = True

    def bump_version(self):
        self._version += 1

    # ------------------------------------------------------------- graph ops

    def bfs_fill(self, int src, int[::1] out):
        """Hop counts from src into out (int32, -1 unreachable)."""
        cdef int i, u, v, du, head, tail
        cdef long long j
        for i in range(self.n):
            out[i] = -1
        out[src] = 0
        self._queue[0] = src
        head = 0
        tail = 1
        while head < tail:
            u = self._queue[head]
            head += 1
            du = out[u] + 1
            for j in range(self.indptr[u], self.indptr[u + 1]):
                v = self.indices[j]
                if out[v] < 0:
                    out[v] = du
                    self._queue[tail] = v
                    tail += 1

    def khood_collect(self, int src, int k, int[::1] out_ids):
        """Ids within 1..k hops of src, ascending. Returns the count."""
        cdef int i, u, v, du, head, tail, m
        cdef long long j
        for i in range(self.n):
            self._depth[i] = -1
        self._depth[src] = 0
        self._queue[0] = src
        head = 0
        tail = 1
        while head < tail:
            u = self._queue[head]
            head += 1
            du = self._depth[u]
            if du >= k:
                continue
            for j in range(self.indptr[u], self.indptr[u + 1]):
                v = self.indices[j]
                if self._depth[v] < 0:
                    self._depth[v] = du + 1
                    self._queue[tail] = v
                    tail += 1
        m = 0
        for v in range(self.n):
            if self._depth[v] > 0:
                out_ids[m] = v
                m += 1
        return m

    # -------------------------------------------------------- sector queries

    cdef bint _node_blocked_for(self, int v, double px, double py) nogil:
        cdef int cnt = self.counts[v]
        if cnt == 0:
            return False
        cdef double dx = px - self.xs[v]
        cdef double dy = py - self.ys[v]
        cdef double d = sqrt(dx * dx + dy * dy)
        if d == 0.0:
            return False
        cdef double ang = -1.0
        cdef double a0, a1, da, width
        cdef int j
        for j in range(cnt):
            if d < self.dmin[v, j]:
                continue
            a0 = self.amin[v, j]
            a1 = self.amax[v, j]
            if a0 == a1:
                return True
            if ang < 0.0:
                ang = _norm(atan2(dy, dx))
            da = _norm(ang - a0)
            width = _norm(a1 - a0)
            if da <= width + ANGLE_EPS or da >= TWO_PI - ANGLE_EPS:
                return True
        return False

    # ------------------------------------------------------ forbidden sector

    cdef int _fs_impl(
        self, int u, double dest_x, double dest_y, double guard,
        double* out3, int* out_members,
    ) nogil:
        cdef double ux = self.xs[u]
        cdef double uy = self.ys[u]
        cdef double ddx = dest_x - ux
        cdef double ddy = dest_y - uy
        if ddx == 0.0 and ddy == 0.0:
            return 0
        cdef double theta_d = _norm(atan2(ddy, ddx))

        cdef long long kh_lo = self.kh_indptr[u]
        cdef long long kh_hi = self.kh_indptr[u + 1]
        cdef int best = -1
        cdef double best_ang = 1e300
        cdef long long idx, j
        cdef int b, v, m, head, n_members, i
        cdef double bx, by, ang
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
            ang = _circ(theta_d, _norm(atan2(by - uy, bx - ux)))
            if ang < best_ang:  # ascending ids: strict keeps the smallest id
                best = b
                best_ang = ang
        if best < 0:
            return 0

        for idx in range(kh_lo, kh_hi):
            self._mask[self.kh_ids[idx]] = 1
        self._membuf[0] = best
        self._mask[best] = 2
        n_members = 1
        head = 0
        while head < n_members:
            m = self._membuf[head]
            head += 1
            for j in range(self.indptr[m], self.indptr[m + 1]):
                v = self.indices[j]
                if self._mask[v] == 1 and self.counts[v] > 0:
                    self._mask[v] = 2
                    self._membuf[n_members] = v
                    n_members += 1
        for idx in range(kh_lo, kh_hi):
            self._mask[self.kh_ids[idx]] = 0

        cdef double d_min = 1e300
        cdef double d
        for i in range(n_members):
            b = self._membuf[i]
            out_members[i] = b
            bx = self.xs[b] - ux
            by = self.ys[b] - uy
            self._angbuf[i] = _norm(atan2(by, bx))
            d = sqrt(bx * bx + by * by)
            if d < d_min:
                d_min = d

        # insertion sort: member sets are small
        cdef double key
        cdef int si, sj
        for si in range(1, n_members):
            key = self._angbuf[si]
            sj = si - 1
            while sj >= 0 and self._angbuf[sj] > key:
                self._angbuf[sj + 1] = self._angbuf[sj]
                sj -= 1
            self._angbuf[sj + 1] = key

        cdef double start, width, best_gap, gap, center, a0, a1
        cdef int best_idx
        if n_members == 1:
            start = self._angbuf[0]
            width = 0.0
        else:
            best_gap = -1.0
            best_idx = 0
            for i in range(n_members):
                if i + 1 < n_members:
                    gap = self._angbuf[i + 1] - self._angbuf[i]
                else:
                    gap = TWO_PI - self._angbuf[n_members - 1] + self._angbuf[0]
                if gap > best_gap:
                    best_gap = gap
                    best_idx = i
            start = self._angbuf[(best_idx + 1) % n_members]
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

    def forbidden_sector(
        self, int u, double dest_x, double dest_y, double guard,
        double[::1] out3, int[::1] out_members,
    ):
        """Best-aligned blocked node, its blocked connected set, covering
        arc with guard. Writes (amin, amax, dmin) to out3 and member ids to
        out_members; returns the member count (0 = no qualifying node)."""
        if not self._khood_set:
            raise RuntimeError("set_khood was never called")
        return self._fs_impl(u, dest_x, dest_y, guard, &out3[0], &out_members[0])

    cdef bint _fs_cached(
        self, int u, double dest_x, double dest_y, double guard, double* out3
    ) nogil:
        cdef int m
        if (
            self._fs_ver[u] == self._version
            and self._fs_dx[u] == dest_x
            and self._fs_dy[u] == dest_y
        ):
            if self._fs_found[u] == 0:
                return False
            out3[0] = self._fs_val[u, 0]
            out3[1] = self._fs_val[u, 1]
            out3[2] = self._fs_val[u, 2]
            return True
        m = self._fs_impl(u, dest_x, dest_y, guard, out3, &self._membuf[0])
        self._fs_ver[u] = self._version
        self._fs_dx[u] = dest_x
        self._fs_dy[u] = dest_y
        self._fs_found[u] = 1 if m > 0 else 0
        if m > 0:
            self._fs_val[u, 0] = out3[0]
            self._fs_val[u, 1] = out3[1]
            self._fs_val[u, 2] = out3[2]
        return m > 0

    # -------------------------------------------------------------- deciding

    cdef int _decide(
        self, int policy, int u, double dest_x, double dest_y, double guard,
        double* fs_out,
    ) nogil:
        cdef double ux = self.xs[u]
        cdef double uy = self.ys[u]
        cdef double sdx = dest_x - ux
        cdef double sdy = dest_y - uy
        cdef double d_self = sqrt(sdx * sdx + sdy * sdy)

        cdef bint has_fs = False
        cdef double f_amin = 0.0, f_amax = 0.0, f_dmin = 0.0
        if policy == _P_OPTIMIZED:
            has_fs = self._fs_cached(u, dest_x, dest_y, guard, fs_out)
            f_amin = fs_out[0]
            f_amax = fs_out[1]
            f_dmin = fs_out[2]

        cdef int best = -1
        cdef double best_d = d_self
        cdef int best_in = -1
        cdef double best_in_ang = 1e300
        cdef long long j
        cdef int v
        cdef double vdx, vdy, d, rdx, rdy, r, a, da, width, ang, ang2
        cdef bint inside
        a = 0.0
        for j in range(self.indptr[u], self.indptr[u + 1]):
            v = self.indices[j]
            vdx = dest_x - self.xs[v]
            vdy = dest_y - self.ys[v]
            d = sqrt(vdx * vdx + vdy * vdy)
            if d >= d_self:
                continue
            if policy != _P_GREEDY and self._node_blocked_for(v, dest_x, dest_y):
                continue
            if has_fs:
                # is this neighbor inside the forbidden sector?
                rdx = self.xs[v] - ux
                rdy = self.ys[v] - uy
                r = sqrt(rdx * rdx + rdy * rdy)
                inside = False
                if r != 0.0 and r >= f_dmin:
                    a = _norm(atan2(rdy, rdx))
                    if f_amin == f_amax:
                        inside = True
                    else:
                        da = _norm(a - f_amin)
                        width = _norm(f_amax - f_amin)
                        inside = da <= width + ANGLE_EPS or da >= TWO_PI - ANGLE_EPS
                if inside:
                    if best < 0:  # only relevant while no outside candidate
                        ang = _circ(a, f_amin)
                        ang2 = _circ(a, f_amax)
                        if ang2 < ang:
                            ang = ang2
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

    def walk(
        self, int policy, int start, int dest_id, double dest_x, double dest_y,
        int budget, double guard, int[::1] chain_out,
    ):
        """Chained forward moves until delivery, block, or budget exhaustion.

        Returns (status, chain length); chain_out receives the visited ids.
        """
        if not self._table_set:
            raise RuntimeError("set_sector_table was never called")
        if policy == _P_OPTIMIZED and not self._khood_set:
            raise RuntimeError("set_khood was never called")
        cdef double fs_out[3]
        cdef int u = start
        cdef int length = 0
        cdef int used = 0
        cdef int nxt
        while True:
            if u == dest_id:
                return _ST_DELIVERED, length
            if used >= budget:
                return _ST_CAP, length
            nxt = self._decide(policy, u, dest_x, dest_y, guard, fs_out)
            if nxt < 0:
                return _ST_BLOCKED, length
            chain_out[length] = nxt
            length += 1
            used += 1
            u = nxt
