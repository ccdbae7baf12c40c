"""Structured simplicial meshes of the square and the cube, and uniform refinement.

Level 0 is a tensor grid split into simplices: two triangles per square
along the ``/`` diagonal, or six Kuhn tetrahedra per cube.  Refinement is
red refinement in 2D and Bey's eight-child rule in 3D, both of which keep
every level congruent to a scaled copy of level 0.  Vertices are numbered
lexicographically by coordinate on every level.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

DOMAINS = {
    "square2d": (np.array([-1.0, -1.0]), np.array([1.0, 1.0])),
    "cube3d": (np.array([0.0, 0.0, 0.0]), np.array([1.0, 1.0, 1.0])),
}


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientField:
    """Piecewise constant coefficient: constant on axis-aligned open boxes.

    ``regions`` holds ``(lower, upper, value)`` triples; points outside every
    box get ``background``.
    """

    regions: tuple
    background: float

    def __post_init__(self):
        regions = tuple(
            (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float), float(v))
            for lo, hi, v in self.regions
        )
        object.__setattr__(self, "regions", regions)
        if self.background <= 0 or any(v <= 0 for _, _, v in regions):
            raise ValueError("coefficient values must be strictly positive")
        for lo, hi, _ in regions:
            if np.any(hi <= lo):
                raise ValueError("empty coefficient region")
        for (lo1, hi1, _), (lo2, hi2, _) in itertools.combinations(regions, 2):
            if np.all(np.minimum(hi1, hi2) > np.maximum(lo1, lo2)):
                raise ValueError("coefficient regions overlap")

    def __call__(self, points):
        points = np.atleast_2d(points)
        values = np.full(len(points), float(self.background))
        for lo, hi, v in self.regions:
            inside = np.all((points > lo) & (points < hi), axis=1)
            values[inside] = v
        return values

    def corners(self):
        for lo, hi, _ in self.regions:
            yield lo
            yield hi


def square_jump_field(eps):
    """kappa = 1 on (-0.5, 0)^2 and (0, 0.5)^2, ``eps`` elsewhere in (-1, 1)^2."""
    return CoefficientField(
        regions=(((-0.5, -0.5), (0.0, 0.0), 1.0), ((0.0, 0.0), (0.5, 0.5), 1.0)),
        background=eps,
    )


def cube_jump_field(eps):
    """kappa = 1 on (0.25, 0.5)^3 and (0.5, 0.75)^3, ``eps`` elsewhere in (0, 1)^3."""
    return CoefficientField(
        regions=(((0.25,) * 3, (0.5,) * 3, 1.0), ((0.5,) * 3, (0.75,) * 3, 1.0)),
        background=eps,
    )


def jump_field(dim, eps):
    return square_jump_field(eps) if dim == 2 else cube_jump_field(eps)


@dataclass(eq=False)
class SimplicialMesh:
    """Conforming simplicial mesh of a box.

    Attributes
    ----------
    vertices : (nv, d) float array
    simplices : (ne, d+1) int array, positively oriented
    facets : (nf, d) int array, each row sorted ascending
    facet_boundary : (nf,) bool array
    simplex_to_facet : (ne, d+1) int array
        ``simplex_to_facet[t, i]`` is the facet of ``t`` opposite ``simplices[t, i]``.
    level : int
    kappa : (ne,) float array or None
    """

    vertices: np.ndarray
    simplices: np.ndarray
    facets: np.ndarray
    facet_boundary: np.ndarray
    simplex_to_facet: np.ndarray
    level: int
    lower: np.ndarray
    upper: np.ndarray
    kappa: np.ndarray = None
    # vertex order consumed by the refinement rule; same vertex sets as `simplices`
    ordered: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_simplices(self):
        return len(self.simplices)

    @property
    def n_facets(self):
        return len(self.facets)

    def signed_volumes(self):
        X = self.vertices[self.simplices]
        E = X[:, 1:, :] - X[:, :1, :]
        return np.linalg.det(E) / math.factorial(self.dim)

    def volumes(self):
        return np.abs(self.signed_volumes())

    def barycenters(self):
        return self.vertices[self.simplices].mean(axis=1)

    def facet_barycenters(self):
        return self.vertices[self.facets].mean(axis=1)

    def on_boundary(self, points=None):
        """Boolean mask of points (default: vertices) lying on the box boundary."""
        points = self.vertices if points is None else points
        return np.any((points == self.lower) | (points == self.upper), axis=1)

    def edges(self):
        """Unique vertex pairs, sorted lexicographically."""
        pairs = list(itertools.combinations(range(self.dim + 1), 2))
        E = np.sort(self.simplices[:, pairs].reshape(-1, 2), axis=1)
        return np.unique(E, axis=0)

    def diameter(self):
        """Largest element edge length."""
        pairs = list(itertools.combinations(range(self.dim + 1), 2))
        X = self.vertices[self.simplices]
        return max(np.linalg.norm(X[:, i] - X[:, j], axis=1).max() for i, j in pairs)

    def check(self):
        """Verify the structural invariants; raise ``MeshError`` on failure."""
        if np.any(self.signed_volumes() <= 0):
            raise MeshError("simplex with non-positive orientation")
        counts = np.bincount(self.simplex_to_facet.ravel(), minlength=self.n_facets)
        if np.any((counts != 1) & (counts != 2)):
            raise MeshError("facet shared by more than two simplices")
        single = counts == 1
        verts_on_bdry = np.all(self.on_boundary()[self.facets], axis=1)
        center_on_bdry = self.on_boundary(self.facet_barycenters())
        if np.any(single != self.facet_boundary) or np.any((verts_on_bdry & single) != self.facet_boundary) \
                or np.any(center_on_bdry != self.facet_boundary):
            raise MeshError("boundary facets do not match the domain boundary")
        if self.dim == 2:
            euler = self.n_vertices - self.n_facets + self.n_simplices + 1
            if euler != 2:
                raise MeshError(f"Euler characteristic {euler} != 2")


def _orient(vertices, simplices):
    X = vertices[simplices]
    det = np.linalg.det(X[:, 1:, :] - X[:, :1, :])
    if np.any(det == 0):
        raise MeshError("degenerate simplex")
    out = simplices.copy()
    neg = det < 0
    out[neg, 0], out[neg, 1] = simplices[neg, 1], simplices[neg, 0]
    return out


def _finish(vertices, ordered, level, lower, upper, kappa=None):
    """Renumber vertices lexicographically and build the facet tables."""
    d = vertices.shape[1]
    perm = np.lexsort(vertices.T[::-1])
    inverse = np.empty_like(perm)
    inverse[perm] = np.arange(len(perm))
    vertices = vertices[perm]
    ordered = inverse[ordered]
    simplices = _orient(vertices, ordered)

    local = [[j for j in range(d + 1) if j != i] for i in range(d + 1)]
    all_facets = np.sort(simplices[:, local], axis=2).reshape(-1, d)
    facets, s2f, counts = np.unique(all_facets, axis=0, return_inverse=True, return_counts=True)
    mesh = SimplicialMesh(
        vertices=vertices,
        simplices=simplices,
        facets=facets,
        facet_boundary=counts == 1,
        simplex_to_facet=s2f.reshape(-1, d + 1),
        level=level,
        lower=lower,
        upper=upper,
        kappa=kappa,
        ordered=ordered,
    )
    return mesh


def _grid_size(lower, upper, h0):
    n = (upper - lower) / h0
    cells = np.rint(n).astype(int)
    if np.any(cells < 1) or np.any(np.abs(n - cells) > 1e-12 * np.maximum(n, 1)):
        raise MeshError(f"h0={h0} does not divide the domain edge lengths {upper - lower}")
    return cells


def build_initial_mesh(domain, h0, coefficient=None):
    """Level-0 triangulation of ``'square2d'`` = (-1,1)^2 or ``'cube3d'`` = (0,1)^3.

    When ``coefficient`` is given, every region corner must lie on the
    ``h0`` grid so that element boundaries resolve the interfaces, and the
    per-element values are stored in ``mesh.kappa``.
    """
    if domain not in DOMAINS:
        raise MeshError(f"unknown domain {domain!r}; expected one of {sorted(DOMAINS)}")
    lower, upper = DOMAINS[domain]
    d = len(lower)
    cells = _grid_size(lower, upper, h0)
    if coefficient is not None:
        for corner in coefficient.corners():
            k = (corner - lower) / h0
            if np.any(np.abs(k - np.rint(k)) > 1e-12):
                raise MeshError(f"coefficient region corner {tuple(corner)} is off the h0={h0} grid")

    axes = [np.arange(c + 1) for c in cells]
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    vertices = lower + idx * h0
    strides = np.array([np.prod(cells[k + 1:] + 1) for k in range(d)], dtype=int)
    base = np.stack(np.meshgrid(*[np.arange(c) for c in cells], indexing="ij"), axis=-1).reshape(-1, d)

    if d == 2:
        # '/' diagonal: (SW, SE, NE) and (SW, NE, NW)
        offsets = [[(0, 0), (1, 0), (1, 1)], [(0, 0), (1, 1), (0, 1)]]
    else:
        # Kuhn: monotone lattice paths from the cube's low to high corner
        offsets = []
        for perm in itertools.permutations(range(d)):
            path = [np.zeros(d, dtype=int)]
            for axis in perm:
                path.append(path[-1] + np.eye(d, dtype=int)[axis])
            offsets.append([tuple(p) for p in path])
    ordered = np.concatenate(
        [np.stack([(base + np.array(o)) @ strides for o in simplex], axis=1) for simplex in offsets]
    )
    mesh = _finish(vertices, ordered, 0, lower, upper)
    if coefficient is not None:
        mesh.kappa = coefficient(mesh.barycenters())
    return mesh


# Local children in terms of parent vertices 0..d and edge midpoints (i, j).
_RED_2D = [
    [0, (0, 1), (0, 2)],
    [(0, 1), 1, (1, 2)],
    [(0, 2), (1, 2), 2],
    [(0, 1), (1, 2), (0, 2)],
]
# Bey's rule; the interior octahedron is cut along the (0,2)-(1,3) diagonal.
_BEY_3D = [
    [0, (0, 1), (0, 2), (0, 3)],
    [(0, 1), 1, (1, 2), (1, 3)],
    [(0, 2), (1, 2), 2, (2, 3)],
    [(0, 3), (1, 3), (2, 3), 3],
    [(0, 1), (0, 2), (0, 3), (1, 3)],
    [(0, 1), (0, 2), (1, 2), (1, 3)],
    [(0, 2), (0, 3), (1, 3), (2, 3)],
    [(0, 2), (1, 2), (1, 3), (2, 3)],
]


def refine_uniform(mesh):
    """Split every simplex into ``2**d`` children through its edge midpoints.

    The coarse vertices keep their coordinates, so the coarse vertex set is
    a subset of the fine one.  Children inherit ``kappa`` from their parent.
    """
    d = mesh.dim
    T = mesh.ordered
    pairs = list(itertools.combinations(range(d + 1), 2))
    all_edges = np.sort(T[:, pairs].reshape(-1, 2), axis=1)
    edges, local_edge = np.unique(all_edges, axis=0, return_inverse=True)
    local_edge = local_edge.reshape(len(T), len(pairs))
    midpoint_id = mesh.n_vertices + local_edge
    vertices = np.concatenate([mesh.vertices, mesh.vertices[edges].mean(axis=1)])

    def column(token):
        if isinstance(token, tuple):
            return midpoint_id[:, pairs.index(token)]
        return T[:, token]

    rule = _RED_2D if d == 2 else _BEY_3D
    children = np.stack([np.stack([column(t) for t in child], axis=1) for child in rule], axis=1)
    ordered = children.reshape(-1, d + 1)
    kappa = None if mesh.kappa is None else np.repeat(mesh.kappa, len(rule))
    return _finish(vertices, ordered, mesh.level + 1, mesh.lower, mesh.upper, kappa)


def evaluate_coefficient(coefficient, mesh):
    """Per-element coefficient values by barycenter lookup."""
    return coefficient(mesh.barycenters())


def build_hierarchy_meshes(domain, h0, levels, coefficient=None):
    """Meshes for levels ``0..levels``."""
    meshes = [build_initial_mesh(domain, h0, coefficient)]
    for _ in range(levels):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def export_text(mesh, path):
    """Write vertices, simplices and facets (with boundary flags) as plain text."""
    with open(path, "w") as fh:
        fh.write(f"# dim {mesh.dim} level {mesh.level}\n")
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in x) + "\n")
        fh.write(f"simplices {mesh.n_simplices}\n")
        for t in mesh.simplices:
            fh.write(" ".join(str(int(i)) for i in t) + "\n")
        fh.write(f"facets {mesh.n_facets}\n")
        for f, b in zip(mesh.facets, mesh.facet_boundary):
            fh.write(" ".join(str(int(i)) for i in f) + f" {int(b)}\n")
