"""Electrical network assembly and the boundary-voltage measurement model.

Two conductor planes (leg a along rows, leg b along columns) are coupled by
an interlayer element at every crossing. Kirchhoff's current law over the
interior nodes gives G*U = S*T; boundary channels are ideal voltmeters, so
lead segments carry no current and each channel reads its edge-node
potential plus the lead's Seebeck EMF.

Sign convention for a branch from node p to node q made of a material with
Seebeck coefficient s: I(p->q) = g*(U_p - U_q) + g*s*(T_p - T_q). KCL then
reads G*U = S*T with S holding the Norton-converted couplings g*s.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.csgraph  # noqa: F401  (registers sp.csgraph)
import scipy.sparse.linalg as spla

from .exceptions import StalenessError, ValidationError
from .mesh import (InterlayerModel, MaterialSet, MeshSpec, NoInterlayer,
                   interlayer_resistance)


# ---------------------------------------------------------------------------
# channel indexing
#
# Channels run counterclockwise around the perimeter:
#   0 .. N-1          top leads, column j (layer 2, leg b)
#   N .. N+M-1        right leads, row i (layer 1, leg a)
#   N+M .. 2N+M-1     bottom leads, column j (layer 2, leg b)
#   2N+M .. 2N+2M-1   left leads, row i (layer 1, leg a)


def pixel_index(i: int, j: int, cols: int) -> int:
    """Row-major pixel index of junction (i, j), zero-based."""
    return i * cols + j


def channel_map(mesh: MeshSpec) -> list[tuple[str, int, int]]:
    """Per-channel (side, line, edge_pixel) in the fixed perimeter order."""
    m, n = mesh.rows, mesh.cols
    table: list[tuple[str, int, int]] = []
    for j in range(n):
        table.append(("top", j, pixel_index(0, j, n)))
    for i in range(m):
        table.append(("right", i, pixel_index(i, n - 1, n)))
    for j in range(n):
        table.append(("bottom", j, pixel_index(m - 1, j, n)))
    for i in range(m):
        table.append(("left", i, pixel_index(i, 0, n)))
    return table


def mirror_channel_permutation(mesh: MeshSpec) -> np.ndarray:
    """Channel permutation induced by reflecting columns j -> cols-1-j."""
    m, n = mesh.rows, mesh.cols
    perm = np.empty(mesh.n_channels, dtype=int)
    for j in range(n):
        perm[j] = n - 1 - j                      # top <-> top
        perm[n + m + j] = n + m + (n - 1 - j)    # bottom <-> bottom
    for i in range(m):
        perm[n + i] = 2 * n + m + i              # right <-> left
        perm[2 * n + m + i] = n + i              # left <-> right
    return perm


def mirror_pixel_permutation(mesh: MeshSpec) -> np.ndarray:
    m, n = mesh.rows, mesh.cols
    perm = np.empty(mesh.n_pixels, dtype=int)
    for i in range(m):
        for j in range(n):
            perm[pixel_index(i, j, n)] = pixel_index(i, n - 1 - j, n)
    return perm


# ---------------------------------------------------------------------------
# assembled system


@dataclass
class NetworkSystem:
    """Assembled KCL system for one mesh, material set, and (for
    temperature-dependent interlayers) one temperature state.

    Treated as immutable after construction; the factorization cache is the
    only lazily filled member and is safe to share read-only.
    """

    mesh: MeshSpec
    materials: MaterialSet
    conductance: sp.csr_matrix            # G, n_nodes x n_nodes, ungauged
    seebeck_sources: sp.csr_matrix        # S, n_nodes x n_pixels
    channel_nodes: np.ndarray             # node index read by each channel
    channel_pixels: np.ndarray            # edge pixel feeding each channel lead
    channel_seebeck: np.ndarray           # lead Seebeck coefficient per channel
    lead_resistance: np.ndarray           # recorded; leads carry no current
    branch_arrays: tuple = ()             # (p, q, g, s) per-branch arrays
    temperature_state: Optional[np.ndarray] = None  # absolute K, nonlinear only
    datum_channel: int = 0
    _lu: object = field(default=None, repr=False, compare=False)
    _deflation: object = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.conductance.shape[0]

    @property
    def is_temperature_dependent(self) -> bool:
        return self.temperature_state is not None

    # -- gauged solve -------------------------------------------------------

    def _factor(self):
        if self._lu is None:
            g_red = self.conductance[1:, 1:].tocsc()
            self._lu = spla.splu(g_red)
        return self._lu

    # branches weaker than this fraction of the strongest branch are
    # treated as weak couplings between near-floating node groups
    _WEAK_RATIO = 1e-4

    def _coarse_space(self):
        """Deflation data spanning the near-floating node-group modes.

        Branches are split by conductance into a strong subgraph (wires,
        closed switches, hot interlayer crossings) and weak couplings many
        orders of magnitude below them. Each connected component of the
        strong subgraph floats almost freely relative to the others, and
        those modes carry nearly all the LU solve error. The coarse basis
        is one indicator vector per floating component (the component
        holding the datum node is grounded and excluded). Both the coarse
        matrix and the coarse residual are evaluated branch-by-branch over
        the weak branches only: forming them through G in floating point
        would cancel the strong terms imperfectly and drown the weak
        couplings, and restricting to weak branches also keeps the coarse
        matrix uniformly scaled and well conditioned.
        """
        if self._deflation is None:
            bp, bq, bg, _ = self.branch_arrays
            strong = bg >= self._WEAK_RATIO * bg.max()
            adj = sp.csr_matrix(
                (np.ones(strong.sum()), (bp[strong], bq[strong])),
                shape=(self.n_nodes, self.n_nodes))
            n_comp, comp = sp.csgraph.connected_components(adj, directed=False)
            if n_comp == 1:
                self._deflation = ()
            else:
                # relabel: component of the datum node -> -1 (grounded)
                label = np.empty(n_comp, dtype=int)
                floating = np.setdiff1d(np.arange(n_comp), [comp[0]])
                label[comp[0]] = -1
                label[floating] = np.arange(n_comp - 1)
                lab = label[comp]
                keep = lab[1:] >= 0
                z = sp.csr_matrix(
                    (np.ones(keep.sum()),
                     (np.nonzero(keep)[0], lab[1:][keep])),
                    shape=(self.n_nodes - 1, n_comp - 1))
                weak = ~strong
                wp, wq, wg = bp[weak], bq[weak], bg[weak]
                lp, lq = lab[wp], lab[wq]
                cross = lp != lq
                wp, wq, wg, lp, lq = (wp[cross], wq[cross], wg[cross],
                                      lp[cross], lq[cross])
                c = np.zeros((n_comp - 1, n_comp - 1))
                for g, a, b_ in zip(wg, lp, lq):
                    if a >= 0:
                        c[a, a] += g
                    if b_ >= 0:
                        c[b_, b_] += g
                    if a >= 0 and b_ >= 0:
                        c[a, b_] -= g
                        c[b_, a] -= g
                self._deflation = (z, sla.lu_factor(c), wp, wq, wg, lp, lq)
        return self._deflation

    def _coarse_correction(self, x: np.ndarray, b: np.ndarray):
        """Exact-residual coarse correction for the floating group modes."""
        z, c_lu, wp, wq, wg, lp, lq = self._coarse_space()
        u = np.concatenate([[0.0], x])
        flow = wg * (u[wp] - u[wq])
        gx = np.zeros(z.shape[1])
        keep_p = lp >= 0
        keep_q = lq >= 0
        np.add.at(gx, lp[keep_p], flow[keep_p])
        np.add.at(gx, lq[keep_q], -flow[keep_q])
        rc = z.T @ b - gx
        return z @ sla.lu_solve(c_lu, rc)

    def seebeck_product(self, w: np.ndarray) -> np.ndarray:
        """Row vector w^T S evaluated branch-by-branch.

        Uses potential differences across each thermocouple branch, so the
        huge near-constant potentials of weakly coupled node groups cancel
        exactly instead of through floating-point subtraction of balanced
        +-g*s terms. ``w`` is the full node-potential vector.
        """
        bp, bq, bg, bs = self.branch_arrays
        npix = self.mesh.n_pixels
        emf = bg * bs * (w[bq] - w[bp])
        row = np.zeros(npix)
        np.add.at(row, bp % npix, emf)
        np.add.at(row, bq % npix, -emf)
        return row

    def solve_potentials(self, rhs: np.ndarray) -> np.ndarray:
        """Solve G*U = rhs with node 0 pinned to zero potential."""
        local, coarse = self.solve_potentials_split(rhs)
        return local + coarse

    def solve_potentials_split(self, rhs: np.ndarray):
        """Gauged solve returning (local, coarse) with U = local + coarse.

        ``coarse`` is exactly constant on each near-floating node group and
        can dwarf the within-group variation carried by ``local``; keeping
        them separate lets within-group potential differences be taken from
        ``local`` alone without rounding against the large constants.
        Residual-controlled iterative refinement plus coarse-mode
        corrections keep ``local`` accurate when interlayer conductances
        are many orders of magnitude below the wire conductances.
        """
        lu = self._factor()
        g_red = self.conductance[1:, 1:]
        deflation = self._coarse_space()
        b = rhs[1:]
        coarse_part = None
        if deflation and np.linalg.norm(b) > 0:
            # peel off the near-floating group potentials first: they can be
            # orders of magnitude above the within-group variation, and
            # solving for both at once loses the small part to rounding
            z, c_lu, wp, wq, wg, lp, lq = deflation
            y = sla.lu_solve(c_lu, z.T @ b)
            zy = np.concatenate([[0.0], z @ y])
            flow = wg * (zy[wp] - zy[wq])
            b = b.copy()
            keep_p = wp != 0
            keep_q = wq != 0
            np.subtract.at(b, wp[keep_p] - 1, flow[keep_p])
            np.add.at(b, wq[keep_q] - 1, flow[keep_q])
            coarse_part = z @ y
        x = lu.solve(b)
        if np.linalg.norm(b) > 0:
            best = np.inf
            for _ in range(60):
                if deflation:
                    x = x + self._coarse_correction(x, b)
                r = b - g_red @ x
                rnorm = np.linalg.norm(r)
                if rnorm >= best or rnorm <= 1e-300:
                    break
                best = rnorm
                x = x + lu.solve(r)
            if deflation:
                x = x + self._coarse_correction(x, b)
        local = np.zeros(self.n_nodes)
        local[1:] = x
        coarse = np.zeros(self.n_nodes)
        if coarse_part is not None:
            coarse[1:] = coarse_part
        return local, coarse

    def _drive(self, t_field: np.ndarray) -> np.ndarray:
        """Temperature rise relative to the cold junction for a given field."""
        t_field = np.asarray(t_field, dtype=float)
        if t_field.shape != (self.mesh.n_pixels,):
            raise ValidationError(
                f"temperature field must have length {self.mesh.n_pixels}")
        if self.temperature_state is not None:
            if not np.array_equal(t_field, self.temperature_state):
                raise StalenessError(
                    "system was assembled at a different temperature state")
            return t_field - self.materials.reference_temperature
        return t_field


def _required_state(materials: MaterialSet) -> bool:
    return not isinstance(materials.interlayer, (NoInterlayer,)) and \
        not _is_constant(materials.interlayer)


def _is_constant(model: InterlayerModel) -> bool:
    from .mesh import ConstantR
    return isinstance(model, ConstantR)


def assemble(mesh: MeshSpec, materials: MaterialSet,
             t_state: Optional[np.ndarray] = None) -> NetworkSystem:
    """Build the KCL system for one temperature state.

    ``t_state`` is the absolute junction-temperature field (length
    rows*cols); it is required when the interlayer is temperature dependent
    and ignored otherwise.
    """
    m, n = mesh.rows, mesh.cols
    npix = mesh.n_pixels
    model = materials.interlayer
    merged = isinstance(model, NoInterlayer)
    temp_dependent = _required_state(materials)

    if temp_dependent:
        if t_state is None:
            raise ValidationError(
                "temperature-dependent interlayer needs a temperature state")
        t_state = np.asarray(t_state, dtype=float)
        if t_state.shape != (npix,):
            raise ValidationError(
                f"temperature state must have length {npix}, got {t_state.shape}")
    else:
        t_state = None

    g_a = mesh.wire_cross_section / (materials.resistivity_leg_a * mesh.pitch)
    g_b = mesh.wire_cross_section / (materials.resistivity_leg_b * mesh.pitch)
    s_a = materials.seebeck_leg_a
    s_b = materials.seebeck_leg_b

    if merged:
        n_nodes = npix
        node1 = lambda i, j: pixel_index(i, j, n)  # noqa: E731
        node2 = node1
    else:
        n_nodes = 2 * npix
        node1 = lambda i, j: pixel_index(i, j, n)            # noqa: E731
        node2 = lambda i, j: npix + pixel_index(i, j, n)     # noqa: E731

    # branch list: (p, q, conductance, seebeck)
    branches: list[tuple[int, int, float, float]] = []
    for i in range(m):
        for j in range(n - 1):  # row wires, leg a, layer 1
            branches.append((node1(i, j), node1(i, j + 1), g_a, s_a))
    for j in range(n):
        for i in range(m - 1):  # column wires, leg b, layer 2
            branches.append((node2(i, j), node2(i + 1, j), g_b, s_b))
    if not merged:
        for i in range(m):
            for j in range(n):
                t_here = (t_state[pixel_index(i, j, n)] if t_state is not None
                          else materials.reference_temperature)
                r = interlayer_resistance(model, mesh, t_here)
                branches.append((node1(i, j), node2(i, j), 1.0 / r, 0.0))

    rows_g, cols_g, vals_g = [], [], []
    rows_s, cols_s, vals_s = [], [], []
    pixel_of_node = np.concatenate([np.arange(npix)] * (1 if merged else 2))
    for p, q, g, s in branches:
        rows_g += [p, q, p, q]
        cols_g += [p, q, q, p]
        vals_g += [g, g, -g, -g]
        if s != 0.0:
            pp, pq = pixel_of_node[p], pixel_of_node[q]
            # b_p = sum g*s*(T_q - T_p); b_q the mirror image
            rows_s += [p, p, q, q]
            cols_s += [pq, pp, pp, pq]
            vals_s += [g * s, -g * s, g * s, -g * s]

    conductance = sp.csr_matrix(
        (vals_g, (rows_g, cols_g)), shape=(n_nodes, n_nodes))
    seebeck = sp.csr_matrix(
        (vals_s, (rows_s, cols_s)), shape=(n_nodes, npix))

    # boundary leads (ideal voltmeters: no current, resistance recorded only)
    lead_len = mesh.lead_length_fraction * mesh.pitch
    r_lead_a = materials.resistivity_leg_a * lead_len / mesh.wire_cross_section
    r_lead_b = materials.resistivity_leg_b * lead_len / mesh.wire_cross_section
    ch_nodes, ch_pixels, ch_seebeck, ch_rlead = [], [], [], []
    for side, line, pix in channel_map(mesh):
        i, j = divmod(pix, n)
        if side in ("left", "right"):
            ch_nodes.append(node1(i, j))
            ch_seebeck.append(s_a)
            ch_rlead.append(r_lead_a)
        else:
            ch_nodes.append(node2(i, j))
            ch_seebeck.append(s_b)
            ch_rlead.append(r_lead_b)
        ch_pixels.append(pix)

    bp = np.array([b[0] for b in branches], dtype=int)
    bq = np.array([b[1] for b in branches], dtype=int)
    bg = np.array([b[2] for b in branches], dtype=float)
    bs = np.array([b[3] for b in branches], dtype=float)

    return NetworkSystem(
        mesh=mesh,
        materials=materials,
        conductance=conductance,
        seebeck_sources=seebeck,
        channel_nodes=np.array(ch_nodes),
        channel_pixels=np.array(ch_pixels),
        channel_seebeck=np.array(ch_seebeck),
        lead_resistance=np.array(ch_rlead),
        branch_arrays=(bp, bq, bg, bs),
        temperature_state=t_state,
    )


# ---------------------------------------------------------------------------
# measurement model


@dataclass(frozen=True)
class SensitivityMatrix:
    """Dense map from junction temperature rises to boundary voltages."""

    entries: np.ndarray            # (2M+2N) x (MN), V/K
    rows: int
    cols: int
    interlayer_tag: str
    datum_channel: int = 0
    temperature_state: Optional[np.ndarray] = None

    @property
    def n_channels(self) -> int:
        return self.entries.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.entries.shape[1]

    def apply(self, t_rise: np.ndarray) -> np.ndarray:
        return self.entries @ np.asarray(t_rise, dtype=float)


def _interlayer_tag(model: InterlayerModel) -> str:
    return type(model).__name__


def raw_boundary_voltages(system: NetworkSystem,
                          t_field: np.ndarray) -> np.ndarray:
    """Ungauged channel potentials for one temperature field."""
    drive = system._drive(t_field)
    u = system.solve_potentials(system.seebeck_sources @ drive)
    return u[system.channel_nodes] + system.channel_seebeck * drive[system.channel_pixels]


def boundary_voltages(system: NetworkSystem, t_field: np.ndarray,
                      datum: int | None = None) -> np.ndarray:
    """Measured boundary-voltage vector V for a temperature field.

    For linear systems ``t_field`` is the rise relative to the cold
    junction; for temperature-dependent systems it is the absolute field
    the system was assembled at (anything else raises ``StalenessError``).
    """
    v = raw_boundary_voltages(system, t_field)
    d = system.datum_channel if datum is None else datum
    return v - v[d]


def sensitivity_matrix(system: NetworkSystem, datum: int | None = None,
                       method: str = "auto") -> SensitivityMatrix:
    """A = I_U G^+ S + I_S, gauged so the datum-channel row is zero.

    ``method`` is "columns" (one solve per pixel), "adjoint" (one solve per
    channel), or "auto" (whichever needs fewer solves). Both routes give the
    same matrix.
    """
    a_raw = raw_sensitivity_matrix(system, method=method)
    d = system.datum_channel if datum is None else datum
    return SensitivityMatrix(
        entries=a_raw - a_raw[d],
        rows=system.mesh.rows,
        cols=system.mesh.cols,
        interlayer_tag=_interlayer_tag(system.materials.interlayer),
        datum_channel=d,
        temperature_state=system.temperature_state,
    )


def raw_sensitivity_matrix(system: NetworkSystem,
                           method: str = "auto") -> np.ndarray:
    mesh = system.mesh
    n_ch, npix = mesh.n_channels, mesh.n_pixels
    if method == "auto":
        method = "adjoint" if n_ch < npix else "columns"
    if method == "columns":
        a1 = np.empty((n_ch, npix))
        s_dense_cols = system.seebeck_sources.tocsc()
        for j in range(npix):
            b = np.asarray(s_dense_cols[:, j].todense()).ravel()
            u = system.solve_potentials(b)
            a1[:, j] = u[system.channel_nodes]
    elif method == "adjoint":
        a1 = np.empty((n_ch, npix))
        for c in range(n_ch):
            node = system.channel_nodes[c]
            if node == 0:
                a1[c] = 0.0
                continue
            e = np.zeros(system.n_nodes)
            e[node] = 1.0
            # G symmetric: w = G^+ e; the coarse part is constant on each
            # node group, so it drops out of the branch-difference product
            w_local, _ = system.solve_potentials_split(e)
            a1[c] = system.seebeck_product(w_local)
    else:
        raise ValidationError(f"unknown method {method!r}")
    a_raw = a1
    a_raw[np.arange(n_ch), system.channel_pixels] += system.channel_seebeck
    return a_raw


def sensitivity_rows(system: NetworkSystem):
    """Yield ungauged rows of A one channel at a time (adjoint solves).

    Lets callers reduce over channels (e.g. per-pixel swing) without
    materializing A for large meshes.
    """
    for c in range(system.mesh.n_channels):
        node = system.channel_nodes[c]
        row = np.zeros(system.mesh.n_pixels)
        if node != 0:
            e = np.zeros(system.n_nodes)
            e[node] = 1.0
            w_local, _ = system.solve_potentials_split(e)
            row = system.seebeck_product(w_local)
        row[system.channel_pixels[c]] += system.channel_seebeck[c]
        yield c, row


def sensitivity_column(system: NetworkSystem, pixel: int,
                       datum: int = 0) -> np.ndarray:
    """One gauged column of A (response to a unit rise at one pixel)."""
    b = np.asarray(system.seebeck_sources[:, pixel].todense()).ravel()
    u = system.solve_potentials(b)
    col = u[system.channel_nodes].copy()
    mask = system.channel_pixels == pixel
    col[mask] += system.channel_seebeck[mask]
    return col - col[datum]


# ---------------------------------------------------------------------------
# matrix export


def export_dense_csv(a: SensitivityMatrix, path, config_hash: str | None = None):
    header_cols = ",".join(f"pixel_{j}" for j in range(a.n_pixels))
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write(header_cols + "\n")
        for row in a.entries:
            fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


def export_coordinate_csv(a: SensitivityMatrix, path,
                          config_hash: str | None = None):
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write(f"# rows={a.n_channels},cols={a.n_pixels}\n")
        fh.write("row,col,value\n")
        for i in range(a.n_channels):
            for j in range(a.n_pixels):
                fh.write(f"{i},{j},{a.entries[i, j]:.12e}\n")
