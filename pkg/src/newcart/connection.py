"""Compatible connections built from (gravity, Coriolis, spatial torsion) data.

The construction fixes an observer z and solves, at each point, the
Koszul-type relation that expresses twice the spatial inner product of
the covariant derivative against a frame field.  Writing X' = P(X),
Y' = P(Y) for the spatial projections and A for the alternation
A(X,Y) = nabla_X Y - nabla_Y X, the relation used here is

    2<P(nabla_X Y), V> =
        X<Y', V> + Y<X', V> - V<X', Y'>
      + 2 w(X) w(Y) <G, V> + 2 w(X) om(Y', V) + 2 w(Y) om(X', V)
      + w(X) (<A(z, Y'), V> - <Y', A(z, V)>)
      - w(Y) (<A(z, X'), V> + <X', A(z, V)>)
      + <A(X', Y'), V> - <A(Y', V), X'> - <A(X', V), Y'>

with w the clock form, G the gravity data, om the Coriolis data, and
A assembled from the data as A(X,Y) = Theta(X,Y) + dw(X,Y) z + [X,Y].
The temporal part of the coefficients is forced by clock compatibility:
w_k Gamma^k_ij = d_i w_j.  The correctness contract is not the printed
formula but the verification suite: clock and metric compatibility, the
torsion-clock identity, and the data round trip must all hold on every
scenario.

All scalar coefficients that sit under a directional derivative are
exact expressions (the spatial tensor g_ij = <P d_i, P d_j> is built
from a symbolic coframe); the per-point numerics are small dense solves.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from . import geometry
from .errors import DimensionMismatch, FrameDegenerate, MetricSingular, NotSpatial
from .expr import (ZERO, const, differentiate, evaluate, is_constant, mul,
                   neg, sub, sum_exprs)
from .geometry import eval_fields, lie_bracket

METRIC_DET_TOL = 1e-10
_BASIS_DET_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """Coordinates of a connection under the observable map.

    gravity: n frame components.  coriolis: strict upper triangle
    {(a, b): expr} with a < b, extended antisymmetrically.  theta:
    {(a, i, j): expr} with coordinate indices i < j, extended
    antisymmetrically in (i, j).  All indices are 0-based.
    """

    gravity: tuple
    coriolis: object
    theta: object

    def __post_init__(self):
        for (a, b) in self.coriolis:
            if not a < b:
                raise DimensionMismatch("coriolis keys must have a < b")
        for (_, i, j) in self.theta:
            if not i < j:
                raise DimensionMismatch("theta keys must have i < j")
        object.__setattr__(self, "coriolis", MappingProxyType(dict(self.coriolis)))
        object.__setattr__(self, "theta", MappingProxyType(dict(self.theta)))

    @classmethod
    def zero(cls, n):
        return cls(tuple(ZERO for _ in range(n)), {}, {})

    def coriolis_entry(self, a, b):
        if a == b:
            return ZERO
        if a < b:
            return self.coriolis.get((a, b), ZERO)
        return neg(self.coriolis.get((b, a), ZERO))

    def theta_entry(self, a, i, j):
        if i == j:
            return ZERO
        if i < j:
            return self.theta.get((a, i, j), ZERO)
        return neg(self.theta.get((a, j, i), ZERO))


def alternation_field(structure, observer, data, x_field, y_field):
    """Symbolic components of A(X,Y) = Theta(X,Y) + dw(X,Y) z + [X,Y]."""
    m, n = structure.dim, structure.n
    dom = ZERO
    for i in range(m):
        for j in range(m):
            dwij = differentiate(structure.omega[j], i)
            dom = dom + mul(dwij, sub(mul(x_field[i], y_field[j]),
                                      mul(y_field[i], x_field[j])))
    theta_coeffs = [ZERO] * n
    for (a, i, j) in sorted(data.theta):
        ex = data.theta[(a, i, j)]
        theta_coeffs[a] = theta_coeffs[a] + mul(
            ex, sub(mul(x_field[i], y_field[j]), mul(x_field[j], y_field[i])))
    bracket = lie_bracket(x_field, y_field)
    comps = []
    for k in range(m):
        spatial = sum_exprs(mul(theta_coeffs[a], structure.frame[a][k]) for a in range(n))
        comps.append(spatial + mul(dom, observer.components[k]) + bracket[k])
    return tuple(comps)


def alternation_at(structure, observer, data, x_field, y_field, p):
    """Pointwise value of A(X,Y) at p."""
    return eval_fields(alternation_field(structure, observer, data, x_field, y_field), p)


def _det_exprs(mat):
    k = len(mat)
    if k == 1:
        return mat[0][0]
    acc = ZERO
    for c in range(k):
        minor = [row[:c] + row[c + 1:] for row in mat[1:]]
        term = mul(mat[0][c], _det_exprs(minor))
        acc = acc + term if c % 2 == 0 else sub(acc, term)
    return acc


def _matrix_inverse_exprs(mat):
    """Adjugate inverse of a small symbolic matrix (list of row lists)."""
    m = len(mat)
    det = _det_exprs(mat)
    inv = [[None] * m for _ in range(m)]
    for i in range(m):
        for j in range(m):
            minor = [row[:i] + row[i + 1:] for r, row in enumerate(mat) if r != j]
            cof = _det_exprs(minor)
            signed = cof if (i + j) % 2 == 0 else neg(cof)
            inv[i][j] = signed / det
    return inv


class _ConnectionKit:
    """Symbolic ingredients of the construction, cached per build."""

    def __init__(self, structure, observer, data):
        self.structure = structure
        self.observer = observer
        self.data = data
        m, n = structure.dim, structure.n
        self.m, self.n = m, n
        omega = structure.omega
        z = observer.components

        self.p_fields = []
        for j in range(m):
            comps = tuple(sub(const(1.0 if k == j else 0.0), mul(omega[j], z[k]))
                          for k in range(m))
            self.p_fields.append(comps)

        basis_rows = [[z[k] if c == 0 else structure.frame[c - 1][k] for c in range(m)]
                      for k in range(m)]
        inverse_rows = _matrix_inverse_exprs(basis_rows)
        self.coframe_rows = [tuple(inverse_rows[1 + a]) for a in range(n)]

        # spatial tensor g_ij = <P d_i, P d_j>, shared symmetric storage
        self.g = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(i, m):
                acc = sum_exprs(
                    mul(self.coframe_rows[a][i],
                        mul(structure.metric[a][b], self.coframe_rows[b][j]))
                    for a in range(n) for b in range(n))
                self.g[i][j] = acc
                self.g[j][i] = acc
        self.dg = [[[differentiate(self.g[i][j], k) for j in range(m)]
                    for i in range(m)] for k in range(m)]
        self.d_frame = [[[differentiate(structure.frame[a][k], i) for i in range(m)]
                         for k in range(m)] for a in range(n)]
        self.tau = [[differentiate(omega[j], i) for j in range(m)] for i in range(m)]

        self._a_cache = {}
        self.all_constant = self._detect_constant()

    def _detect_constant(self):
        exprs = list(self.structure.omega) + list(self.observer.components)
        for f in self.structure.frame:
            exprs.extend(f)
        for row in self.structure.metric:
            exprs.extend(row)
        exprs.extend(self.data.gravity)
        exprs.extend(self.data.coriolis.values())
        exprs.extend(self.data.theta.values())
        return all(is_constant(e) for e in exprs)

    def field(self, key):
        if key[0] == "z":
            return self.observer.components
        if key[0] == "P":
            return self.p_fields[key[1]]
        return self.structure.frame[key[1]]

    def a_field(self, key_u, key_v):
        """Cached symbolic A(U, V); antisymmetry resolved structurally."""
        if key_u == key_v:
            return tuple(ZERO for _ in range(self.m))
        comps = self._a_cache.get((key_u, key_v))
        if comps is None:
            comps = alternation_field(self.structure, self.observer, self.data,
                                      self.field(key_u), self.field(key_v))
            self._a_cache[(key_u, key_v)] = comps
            self._a_cache[(key_v, key_u)] = tuple(neg(c) for c in comps)
        return comps

    def point_state(self, p):
        """Evaluate every cached expression at p with one shared memo."""
        p = np.asarray(p, dtype=float)
        memo = {}
        m, n = self.m, self.n
        S = self.structure
        omega_v = eval_fields(S.omega, p, memo)
        z_v = eval_fields(self.observer.components, p, memo)
        frame_v = np.array([eval_fields(f, p, memo) for f in S.frame])  # (n, m)
        h = geometry.metric_matrix(S, p, memo)

        basis = np.empty((m, m))
        basis[:, 0] = z_v
        basis[:, 1:] = frame_v.T
        if abs(np.linalg.det(basis)) < _BASIS_DET_TOL:
            raise FrameDegenerate(f"adapted basis singular at {tuple(p)}")
        coframe = np.linalg.inv(basis)[1:, :]  # (n, m); column j decomposes P d_j

        g_v = np.array([[evaluate(self.g[i][j], p, memo) for j in range(m)]
                        for i in range(m)])
        dg_v = np.array([[[evaluate(self.dg[k][i][j], p, memo) for j in range(m)]
                          for i in range(m)] for k in range(m)])
        d_frame_v = np.array([[[evaluate(self.d_frame[a][k][i], p, memo)
                                for i in range(m)] for k in range(m)]
                              for a in range(n)])
        tau_v = np.array([[evaluate(self.tau[i][j], p, memo) for j in range(m)]
                          for i in range(m)])

        grav_coeff = eval_fields(self.data.gravity, p, memo)
        w_mat = np.zeros((n, n))
        for (a, b), ex in self.data.coriolis.items():
            w = evaluate(ex, p, memo)
            w_mat[a, b] = w
            w_mat[b, a] = -w

        def coeffs(key_u, key_v):
            vec = eval_fields(self.a_field(key_u, key_v), p, memo)
            return coframe @ vec

        azp = np.column_stack([coeffs(("z",), ("P", j)) for j in range(m)])  # (n, m)
        aze = np.column_stack([coeffs(("z",), ("E", a)) for a in range(n)])  # (n, n)
        app = {(i, j): coeffs(("P", i), ("P", j))
               for i in range(m) for j in range(i + 1, m)}
        ape = np.empty((m, n, n))
        for j in range(m):
            for a in range(n):
                ape[j, a] = coeffs(("P", j), ("E", a))

        return {
            "p": p, "omega": omega_v, "z": z_v, "frame": frame_v, "h": h,
            "coframe": coframe, "g": g_v, "dg": dg_v, "d_frame": d_frame_v,
            "tau": tau_v, "gravity": grav_coeff, "w": w_mat,
            "azp": azp, "aze": aze, "app": app, "ape": ape,
        }

    def rhs_at(self, p):
        """Right-hand side of the pointwise relation, shape (m, m, n)."""
        st = self.point_state(p)
        m, n = self.m, self.n
        omega_v, frame_v, h = st["omega"], st["frame"], st["h"]
        g_v, dg_v, d_frame_v = st["g"], st["dg"], st["d_frame"]
        qp = st["coframe"]

        term1 = (np.einsum("ijl,al->ija", dg_v, frame_v)
                 + np.einsum("jl,ali->ija", g_v, d_frame_v))
        deriv = term1 + term1.swapaxes(0, 1) - np.einsum("ak,kij->ija", frame_v, dg_v)

        hg = h @ st["gravity"]
        grav = 2.0 * np.einsum("i,j,a->ija", omega_v, omega_v, hg)

        cor_m = np.einsum("bj,ba->ja", qp, st["w"])
        cor = 2.0 * (omega_v[:, None, None] * cor_m[None, :, :]
                     + omega_v[None, :, None] * cor_m[:, None, :])

        h_azp = h @ st["azp"]   # (n, m)
        h_aze = h @ st["aze"]   # (n, n)
        hq = h @ qp             # (n, m)
        aterms = np.zeros((m, m, n))
        zero_n = np.zeros(n)
        for i in range(m):
            for j in range(m):
                if i < j:
                    happ = h @ st["app"][(i, j)]
                elif i > j:
                    happ = -(h @ st["app"][(j, i)])
                else:
                    happ = zero_n
                for a in range(n):
                    aterms[i, j, a] = (
                        omega_v[i] * (h_azp[a, j] - qp[:, j] @ h_aze[:, a])
                        - omega_v[j] * (h_azp[a, i] + qp[:, i] @ h_aze[:, a])
                        + happ[a]
                        - st["ape"][j, a] @ hq[:, i]
                        - st["ape"][i, a] @ hq[:, j]
                    )
        return deriv + grav + cor + aterms, st

    def christoffel_at(self, p):
        rhs, st = self.rhs_at(p)
        m, n = self.m, self.n
        h = st["h"]
        if abs(np.linalg.det(h)) <= METRIC_DET_TOL:
            raise MetricSingular(f"spatial metric singular at {tuple(st['p'])}")
        c = np.linalg.solve(2.0 * h, rhs.reshape(m * m, n).T).T.reshape(m, m, n)
        gamma = (np.einsum("ij,k->kij", st["tau"], st["z"])
                 + np.einsum("ija,ak->kij", c, st["frame"]))
        return gamma


class Connection:
    """Pointwise evaluator of coefficients Gamma^k_ij at chart points.

    Convention: nabla_{d_i} d_j = Gamma^k_ij d_k; the lower index pair
    need not be symmetric.  Coefficients are computed lazily and
    memoized keyed by the point's raw float bytes; evaluation is pure,
    so concurrent readers observe identical values.
    """

    def __init__(self, structure, observer, data=None, kit=None, gamma_exprs=None):
        if (kit is None) == (gamma_exprs is None):
            raise ValueError("provide exactly one of kit or gamma_exprs")
        self.structure = structure
        self.observer = observer
        self.data = data
        self._kit = kit
        self._gamma_exprs = gamma_exprs
        self._cache = {}
        if kit is not None:
            self._constant = kit.all_constant
        else:
            self._constant = all(is_constant(e) for plane in gamma_exprs
                                 for row in plane for e in row)
        self._const_gamma = None

    @property
    def is_built(self):
        return self._kit is not None

    def christoffel(self, p):
        p = np.asarray(p, dtype=float)
        if self._const_gamma is not None:
            return self._const_gamma
        key = p.tobytes()
        gamma = self._cache.get(key)
        if gamma is not None:
            return gamma
        if self._kit is not None:
            gamma = self._kit.christoffel_at(p)
        else:
            m = self.structure.dim
            memo = {}
            gamma = np.array([[[evaluate(self._gamma_exprs[k][i][j], p, memo)
                                for j in range(m)] for i in range(m)]
                              for k in range(m)])
        gamma.setflags(write=False)
        if self._constant:
            self._const_gamma = gamma
        self._cache[key] = gamma
        return gamma


_KIT_CACHE = {}


def _kit_for(structure, observer, data):
    key = (id(structure), id(observer), id(data))
    hit = _KIT_CACHE.get(key)
    if hit is not None and hit[0] is structure and hit[1] is observer and hit[2] is data:
        return hit[3]
    kit = _ConnectionKit(structure, observer, data)
    if len(_KIT_CACHE) > 8:
        _KIT_CACHE.clear()
    _KIT_CACHE[key] = (structure, observer, data, kit)
    return kit


def koszul_rhs(structure, observer, data, i, j, a, p):
    """One component of the pointwise right-hand side, 2<P(nabla_i d_j), E_a>."""
    rhs, _ = _kit_for(structure, observer, data).rhs_at(p)
    return float(rhs[i, j, a])


def build_connection(structure, observer, data=None):
    """Construct the compatible connection determined by the data triple."""
    if data is None:
        data = ConnectionData.zero(structure.n)
    return Connection(structure, observer, data=data,
                      kit=_kit_for(structure, observer, data))


def connection_from_exprs(structure, observer, gamma_exprs):
    """Wrap user-supplied Christoffel expressions for verification workflows."""
    return Connection(structure, observer, gamma_exprs=gamma_exprs)


def covariant_derivative(connection, x_field, y_field, p):
    """(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j at p."""
    m = connection.structure.dim
    memo = {}
    xv = eval_fields(x_field, p, memo)
    yv = eval_fields(y_field, p, memo)
    dmat = np.array([[evaluate(differentiate(y_field[k], i), p, memo)
                      for i in range(m)] for k in range(m)])
    gamma = connection.christoffel(p)
    return dmat @ xv + np.einsum("kij,i,j->k", gamma, xv, yv)


def torsion_at(connection, x_field, y_field, p):
    """Tor(X,Y) = nabla_X Y - nabla_Y X - [X,Y] at p."""
    forward = covariant_derivative(connection, x_field, y_field, p)
    backward = covariant_derivative(connection, y_field, x_field, p)
    bracket = eval_fields(lie_bracket(x_field, y_field), p)
    return forward - backward - bracket


def gravity_of(connection, observer):
    """Pointwise evaluator of nabla_z z."""
    z = observer.components
    m = len(z)
    dz = [[differentiate(z[k], i) for i in range(m)] for k in range(m)]

    def at(p):
        memo = {}
        zv = eval_fields(z, p, memo)
        dmat = np.array([[evaluate(dz[k][i], p, memo) for i in range(m)]
                         for k in range(m)])
        gamma = connection.christoffel(p)
        return dmat @ zv + np.einsum("kij,i,j->k", gamma, zv, zv)

    return at


def _nabla_direction_z(connection, observer, v, p):
    """nabla_v z for a point vector v (tensorial in the direction)."""
    z = observer.components
    m = len(z)
    memo = {}
    zv = eval_fields(z, p, memo)
    dmat = np.array([[evaluate(differentiate(z[k], i), p, memo) for i in range(m)]
                     for k in range(m)])
    gamma = connection.christoffel(p)
    v = np.asarray(v, dtype=float)
    return dmat @ v + np.einsum("kij,i,j->k", gamma, v, zv)


def coriolis_of(connection, observer, v, w, p):
    """Half the antisymmetrized pairing of nabla z against two spatial vectors."""
    S = connection.structure
    for vec in (v, w):
        pairing = geometry.omega_apply(S, vec, p)
        if abs(pairing) > geometry.SPATIAL_INPUT_TOL:
            raise NotSpatial(f"clock pairing {pairing!r} at {tuple(p)}")
    nv = _nabla_direction_z(connection, observer, v, p)
    nw = _nabla_direction_z(connection, observer, w, p)
    return 0.5 * (geometry.inner(S, nv, w, p) - geometry.inner(S, v, nw, p))


@dataclass
class ObservableImage:
    """(gravity, Coriolis, spatial torsion) of a connection at sample points."""

    points: list
    gravity: np.ndarray          # (N, n) frame coefficients of nabla_z z
    coriolis: np.ndarray         # (N, n, n), antisymmetric per point
    torsion_spatial: np.ndarray  # (N, n, m, m): coefficients of P(Tor(d_i, d_j))

    def deviations(self, data, structure):
        """Per-point max deviation of the image from a data triple."""
        n = structure.n
        m = structure.dim
        out = np.zeros(len(self.points))
        for idx, p in enumerate(self.points):
            memo = {}
            worst = 0.0
            for a in range(n):
                worst = max(worst, abs(self.gravity[idx, a]
                                       - evaluate(data.gravity[a], p, memo)))
            for a in range(n):
                for b in range(a + 1, n):
                    want = evaluate(data.coriolis_entry(a, b), p, memo)
                    worst = max(worst, abs(self.coriolis[idx, a, b] - want))
            for a in range(n):
                for i in range(m):
                    for j in range(i + 1, m):
                        want = evaluate(data.theta_entry(a, i, j), p, memo)
                        worst = max(worst, abs(self.torsion_spatial[idx, a, i, j] - want))
            out[idx] = worst
        return out


def observable_map(connection, observer, points=None):
    """Evaluate the observable triple of a connection over sample points."""
    S = connection.structure
    m, n = S.dim, S.n
    if points is None:
        points = S.sample_points()
    grav_at = gravity_of(connection, observer)
    z = observer.components
    dz = [[differentiate(z[k], i) for i in range(m)] for k in range(m)]

    grav_img = np.zeros((len(points), n))
    cor_img = np.zeros((len(points), n, n))
    tor_img = np.zeros((len(points), n, m, m))
    for idx, p in enumerate(points):
        memo = {}
        inv = geometry.adapted_frame_inverse(S, observer, p, memo)
        coframe = inv[1:, :]
        h = geometry.metric_matrix(S, p, memo)
        frame_v = geometry.frame_matrix(S, p, memo)  # (m, n)
        gamma = connection.christoffel(p)
        zv = eval_fields(z, p, memo)
        dmat = np.array([[evaluate(dz[k][i], p, memo) for i in range(m)]
                         for k in range(m)])

        grav_img[idx] = coframe @ grav_at(p)

        # nabla_{E_a} z for every frame direction, then antisymmetrize
        nz = dmat @ frame_v + np.einsum("kij,ia,j->ka", gamma, frame_v, zv)
        coeff_nz = coframe @ nz  # (n, n): column a decomposes nabla_{E_a} z
        pairing = coeff_nz.T @ h  # [a, b] = <nabla_{E_a} z, E_b>
        cor_img[idx] = 0.5 * (pairing - pairing.T)

        for i in range(m):
            for j in range(i + 1, m):
                tor = gamma[:, i, j] - gamma[:, j, i]
                coeffs = coframe @ tor
                tor_img[idx, :, i, j] = coeffs
                tor_img[idx, :, j, i] = -coeffs
    return ObservableImage(points=list(points), gravity=grav_img,
                           coriolis=cor_img, torsion_spatial=tor_img)
