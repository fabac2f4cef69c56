"""Conforming triangulation with an embedded channel edge chain.

A uniform grid of right triangles (fixed diagonal per cell, so assembly
order is reproducible) discretizes the rectangle. The vasculature is
snapped onto grid nodes and realized as a chain of element edges, which
is what makes the channel line integral assemblable edge-by-edge.
Second-order elements add shared midside nodes on every edge.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Domain2D, VasculaturePath, arc_length

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True, eq=False)
class BaseGrid:
    """Uniform right-triangle grid before channel embedding."""

    domain: Domain2D
    n: int  # subdivisions per direction
    element_order: int
    nodes: np.ndarray = field(repr=False)  # (N, 2)
    triangles: np.ndarray = field(repr=False)  # (T, 3) or (T, 6)
    boundary_edges: np.ndarray = field(repr=False)  # (E, 2) or (E, 3)
    edge_midnodes: dict = field(repr=False, default_factory=dict)

    @property
    def hx(self) -> float:
        return self.domain.width / self.n

    @property
    def hy(self) -> float:
        return self.domain.height / self.n

    def corner_id(self, ix: int, iy: int) -> int:
        return iy * (self.n + 1) + ix


@dataclass(frozen=True, eq=False)
class ChannelMesh:
    """Triangulation of the domain whose edge subset realizes the channel.

    channel_nodes is the ordered corner-node chain from inlet to outlet;
    tangents/lengths describe each chain edge in flow direction. For
    second-order elements channel_mids holds the midside node of each
    chain edge. boundary_tags partition the boundary into dirichlet and
    neumann pieces.
    """

    domain: Domain2D
    n: int
    element_order: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_edges: np.ndarray = field(repr=False)
    boundary_tags: np.ndarray = field(repr=False)
    channel_nodes: np.ndarray = field(repr=False)
    channel_mids: np.ndarray = field(repr=False)
    channel_tangents: np.ndarray = field(repr=False)
    channel_lengths: np.ndarray = field(repr=False)
    inlet_node: int | None
    outlet_node: int | None
    snap_error: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def has_channel(self) -> bool:
        return self.channel_nodes.size > 0

    @property
    def channel_edges(self) -> list:
        """(node_a, node_b, tangent, length) per chain edge, inlet to outlet."""
        return [
            (int(self.channel_nodes[k]), int(self.channel_nodes[k + 1]),
             self.channel_tangents[k], float(self.channel_lengths[k]))
            for k in range(len(self.channel_lengths))
        ]

    @property
    def channel_arc_length(self) -> float:
        return float(np.sum(self.channel_lengths))

    def channel_arc_coords(self) -> np.ndarray:
        """Arc-length s of every chain node, starting at 0 at the inlet."""
        return np.concatenate([[0.0], np.cumsum(self.channel_lengths)])

    def dirichlet_nodes(self) -> np.ndarray:
        """Unique node ids on dirichlet-tagged boundary edges (midside included)."""
        sel = self.boundary_tags == DIRICHLET
        if not np.any(sel):
            return np.empty(0, dtype=int)
        return np.unique(self.boundary_edges[sel].ravel())


@dataclass(frozen=True)
class MeshStats:
    n_nodes: int
    n_triangles: int
    h_max: float  # m
    total_area: float  # m^2


def build_structured_mesh(domain: Domain2D, n: int, element_order: int = 1) -> BaseGrid:
    """(n+1)^2 corner nodes, 2n^2 right triangles (fixed lower-left diagonal)."""
    if n < 2:
        raise ValueError("need at least 2 subdivisions per direction")
    if element_order not in (1, 2):
        raise ValueError("element_order must be 1 or 2")
    hx, hy = domain.width / n, domain.height / n
    ix, iy = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    nodes = np.column_stack([(ix * hx).ravel(), (iy * hy).ravel()])

    def nid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            ll, lr = nid(i, j), nid(i + 1, j)
            ul, ur = nid(i, j + 1), nid(i + 1, j + 1)
            tris.append((ll, lr, ur))
            tris.append((ll, ur, ul))
    triangles = np.array(tris, dtype=int)

    bedges = []
    for i in range(n):
        bedges.append((nid(i, 0), nid(i + 1, 0)))  # bottom
    for j in range(n):
        bedges.append((nid(n, j), nid(n, j + 1)))  # right
    for i in range(n, 0, -1):
        bedges.append((nid(i, n), nid(i - 1, n)))  # top
    for j in range(n, 0, -1):
        bedges.append((nid(0, j), nid(0, j - 1)))  # left
    boundary_edges = np.array(bedges, dtype=int)

    edge_midnodes: dict = {}
    if element_order == 2:
        nodes, triangles, boundary_edges, edge_midnodes = _add_midside_nodes(
            nodes, triangles, boundary_edges
        )
    return BaseGrid(
        domain=domain,
        n=n,
        element_order=element_order,
        nodes=nodes,
        triangles=triangles,
        boundary_edges=boundary_edges,
        edge_midnodes=edge_midnodes,
    )


def _add_midside_nodes(nodes, triangles, boundary_edges):
    """Insert one shared node at the midpoint of every triangle edge."""
    mid_of = {}
    new_coords = []
    next_id = len(nodes)

    def midnode(a, b):
        nonlocal next_id
        key = (min(a, b), max(a, b))
        if key not in mid_of:
            mid_of[key] = next_id
            new_coords.append(0.5 * (nodes[a] + nodes[b]))
            next_id += 1
        return mid_of[key]

    tris6 = []
    for a, b, c in triangles:
        tris6.append((a, b, c, midnode(a, b), midnode(b, c), midnode(c, a)))
    bedges3 = [(a, b, midnode(a, b)) for a, b in boundary_edges]
    all_nodes = np.vstack([nodes, np.array(new_coords)])
    return all_nodes, np.array(tris6, dtype=int), np.array(bedges3, dtype=int), mid_of


def _snap_index(value: float, h: float, n: int) -> int:
    return int(min(max(round(value / h), 0), n))


def embed_vasculature(grid: BaseGrid, path: VasculaturePath) -> ChannelMesh:
    """Snap the path onto grid nodes and trace it as an edge chain.

    Vertices snap to the nearest grid node (reported error is at most half
    a cell); the snapped geometry replaces the requested path everywhere
    downstream, including arc lengths.
    """
    n, hx, hy = grid.n, grid.hx, grid.hy
    seg = np.diff(path.vertices, axis=0)
    if np.any(np.all(np.abs(seg) > 1e-12, axis=1)):
        raise ValueError("path must be axis-aligned to embed in a structured grid")

    snapped = []
    snap_error = 0.0
    for x, y in path.vertices:
        ix, iy = _snap_index(x, hx, n), _snap_index(y, hy, n)
        snap_error = max(snap_error, float(np.hypot(ix * hx - x, iy * hy - y)))
        if not snapped or snapped[-1] != (ix, iy):
            snapped.append((ix, iy))
    if len(snapped) < 2:
        raise ValueError("path collapses to a single node at this resolution")

    chain: list[int] = [grid.corner_id(*snapped[0])]
    for (ix0, iy0), (ix1, iy1) in zip(snapped[:-1], snapped[1:]):
        if ix0 != ix1 and iy0 != iy1:
            raise ValueError("snapped path segment is not axis-aligned")
        dx = np.sign(ix1 - ix0)
        dy = np.sign(iy1 - iy0)
        ix, iy = ix0, iy0
        while (ix, iy) != (ix1, iy1):
            ix, iy = ix + dx, iy + dy
            chain.append(grid.corner_id(int(ix), int(iy)))
    if len(set(chain)) != len(chain):
        raise ValueError("snapped path self-overlaps")

    for label, node in (("inlet", chain[0]), ("outlet", chain[-1])):
        x, y = grid.nodes[node]
        on_boundary = (
            abs(x) < 1e-12 or abs(x - grid.domain.width) < 1e-12
            or abs(y) < 1e-12 or abs(y - grid.domain.height) < 1e-12
        )
        if not on_boundary:
            raise ValueError(f"channel {label} does not lie on the domain boundary")

    chain_arr = np.array(chain, dtype=int)
    vecs = grid.nodes[chain_arr[1:]] - grid.nodes[chain_arr[:-1]]
    lengths = np.hypot(vecs[:, 0], vecs[:, 1])
    tangents = vecs / lengths[:, None]
    if grid.element_order == 2:
        mids = np.array(
            [grid.edge_midnodes[(min(a, b), max(a, b))]
             for a, b in zip(chain[:-1], chain[1:])],
            dtype=int,
        )
    else:
        mids = np.empty(0, dtype=int)

    return ChannelMesh(
        domain=grid.domain,
        n=grid.n,
        element_order=grid.element_order,
        nodes=grid.nodes,
        triangles=grid.triangles,
        boundary_edges=grid.boundary_edges,
        boundary_tags=np.full(len(grid.boundary_edges), NEUMANN, dtype=object),
        channel_nodes=chain_arr,
        channel_mids=mids,
        channel_tangents=tangents,
        channel_lengths=lengths,
        inlet_node=int(chain_arr[0]),
        outlet_node=int(chain_arr[-1]),
        snap_error=snap_error,
    )


def mesh_without_channel(grid: BaseGrid) -> ChannelMesh:
    """Plain triangulation (no channel, no inlet constraint)."""
    return ChannelMesh(
        domain=grid.domain,
        n=grid.n,
        element_order=grid.element_order,
        nodes=grid.nodes,
        triangles=grid.triangles,
        boundary_edges=grid.boundary_edges,
        boundary_tags=np.full(len(grid.boundary_edges), NEUMANN, dtype=object),
        channel_nodes=np.empty(0, dtype=int),
        channel_mids=np.empty(0, dtype=int),
        channel_tangents=np.empty((0, 2)),
        channel_lengths=np.empty(0),
        inlet_node=None,
        outlet_node=None,
        snap_error=0.0,
    )


def tag_boundary(mesh: ChannelMesh, spec=None) -> ChannelMesh:
    """Assign dirichlet/neumann tags to every boundary edge.

    spec is a callable mapping an edge midpoint (x, y) to a tag string;
    None keeps the default all-neumann partition (adiabatic lateral
    boundary with q_p = 0).
    """
    if spec is None:
        tags = np.full(len(mesh.boundary_edges), NEUMANN, dtype=object)
    else:
        tags = []
        for edge in mesh.boundary_edges:
            mid = 0.5 * (mesh.nodes[edge[0]] + mesh.nodes[edge[1]])
            tag = spec(mid[0], mid[1])
            if tag not in (DIRICHLET, NEUMANN):
                raise ValueError(
                    f"boundary spec returned {tag!r} at {tuple(mid)}; each edge "
                    f"needs exactly one of '{DIRICHLET}'/'{NEUMANN}'"
                )
            tags.append(tag)
        tags = np.array(tags, dtype=object)
    return replace(mesh, boundary_tags=tags)


def triangle_areas(mesh) -> np.ndarray:
    p = mesh.nodes[mesh.triangles[:, :3]]
    return 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )


def mesh_stats(mesh: ChannelMesh) -> MeshStats:
    p = mesh.nodes[mesh.triangles[:, :3]]
    edges = np.stack([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ])
    return MeshStats(
        n_nodes=mesh.n_nodes,
        n_triangles=len(mesh.triangles),
        h_max=float(edges.max()),
        total_area=float(np.sum(triangle_areas(mesh))),
    )


def snapped_path(mesh: ChannelMesh) -> VasculaturePath:
    """The channel chain as a polyline (the geometry actually solved)."""
    if not mesh.has_channel:
        raise ValueError("mesh has no channel")
    return VasculaturePath(mesh.nodes[mesh.channel_nodes].copy())


def export_mesh_csv(mesh: ChannelMesh, outdir: str) -> list[str]:
    """Write nodes/triangles/boundary/channel CSVs; returns file paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []

    def emit(name, header, rows):
        fp = os.path.join(outdir, name)
        with open(fp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        written.append(fp)

    emit("nodes.csv", ["node_id", "x", "y"],
         [(i, repr(float(x)), repr(float(y))) for i, (x, y) in enumerate(mesh.nodes)])
    emit("triangles.csv", [f"n{k}" for k in range(mesh.triangles.shape[1])],
         [tuple(int(v) for v in row) for row in mesh.triangles])
    emit("boundary_edges.csv", ["node_a", "node_b", "tag"],
         [(int(e[0]), int(e[1]), t) for e, t in zip(mesh.boundary_edges, mesh.boundary_tags)])
    s_coords = mesh.channel_arc_coords() if mesh.has_channel else np.empty(0)
    rows = []
    for k, node in enumerate(mesh.channel_nodes):
        if k < len(mesh.channel_lengths):
            tx, ty = mesh.channel_tangents[k]
        else:
            tx, ty = mesh.channel_tangents[-1]
        rows.append((int(node), repr(float(s_coords[k])), repr(float(tx)), repr(float(ty))))
    emit("channel_chain.csv", ["node_id", "s", "t_x", "t_y"], rows)
    return written


def validate_mesh(mesh: ChannelMesh) -> None:
    """Raise on violated structural invariants (positive areas, chain shape)."""
    p = mesh.nodes[mesh.triangles[:, :3]]
    signed = 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    if np.any(signed <= 0):
        raise ValueError("mesh holds non-CCW or degenerate triangles")
    if mesh.has_channel:
        if mesh.channel_nodes[0] != mesh.inlet_node or mesh.channel_nodes[-1] != mesh.outlet_node:
            raise ValueError("channel chain endpoints disagree with inlet/outlet")
        if len(set(mesh.channel_nodes.tolist())) != len(mesh.channel_nodes):
            raise ValueError("channel chain is not simple")
    if len(mesh.boundary_tags) != len(mesh.boundary_edges):
        raise ValueError("boundary tags do not cover the boundary exactly once")
