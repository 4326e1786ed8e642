"""Conforming triangulations of the unit disk with small circular holes.

Around each hole a structured log-polar patch of staggered rings resolves every
scale from the hole radius up to a patch radius R_k; the rest of the disk is a
quasi-uniform Delaunay mesh relaxed with a spring model, sharing the outer ring
of each patch as fixed nodes.

Hole radii can be as small as 1e-11 while centers are O(1), so every vertex
that belongs to a patch keeps its offset from the hole center (`local`) next to
its global coordinates.  Geometry of triangles whose three vertices belong to the
same patch is always computed from those offsets.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import Delaunay

from .errors import AssemblyError, ResourceError

VERTEX_BUDGET = 500_000

INTERIOR, OUTER = 0, -1  # hole k is tagged k + 1


@dataclass(frozen=True)
class GradingSpec:
    """Element sizing: `n_theta` nodes per ring, ring ratio `growth` (None picks the
    value that makes patch triangles equilateral), `target_h_far` away from holes."""

    target_h_far: float = 0.04
    n_theta: int = 64
    growth: Optional[float] = None
    layers: Optional[int] = None
    relax_iterations: int = 80
    seed: int = 0

    def __post_init__(self):
        if not self.target_h_far > 0:
            raise ValueError("target_h_far must be positive")
        if self.n_theta < 32:
            raise ValueError("each hole needs at least 32 rim vertices")
        if self.growth is not None and not 1.0 < self.growth <= 2.0:
            raise ValueError("growth must lie in (1, 2]")

    @property
    def ring_ratio(self):
        if self.growth is not None:
            return self.growth
        return 1.0 + math.sqrt(3.0) * math.pi / self.n_theta


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (N, 2) global coordinates
    triangles: np.ndarray  # (M, 3), counter-clockwise
    tags: np.ndarray  # 0 interior, -1 outer circle, k + 1 rim of hole k
    anchor: np.ndarray  # patch index of each vertex or -1
    local: np.ndarray  # offset from centers[anchor]; zero when anchor == -1
    centers: np.ndarray  # (m, 2) patch centers
    radii: np.ndarray  # (m,) hole radii, 0 for an unpierced patch
    patch_radius: np.ndarray = field(default=None)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_holes(self):
        return int(np.count_nonzero(self.radii > 0))

    @property
    def boundary(self):
        return self.tags != INTERIOR

    @property
    def interior(self):
        return self.tags == INTERIOR

    def triangle_frames(self):
        """Per-triangle frame: the shared anchor of its three vertices, else -1."""
        a = self.anchor[self.triangles]
        same = (a[:, 0] == a[:, 1]) & (a[:, 1] == a[:, 2])
        return np.where(same, a[:, 0], -1)

    def triangle_coords(self):
        """(M, 3, 2) vertex coordinates in each triangle's frame, plus the frames."""
        frames = self.triangle_frames()
        xy = self.vertices[self.triangles]
        loc = self.local[self.triangles]
        xy = np.where((frames >= 0)[:, None, None], loc, xy)
        return xy, frames

    def offsets(self, k):
        """Exact offsets of every vertex from centers[k]."""
        off = self.vertices - self.centers[k]
        mine = self.anchor == k
        off[mine] = self.local[mine]
        return off

    def distance_to(self, k):
        off = self.offsets(k)
        return np.hypot(off[:, 0], off[:, 1])

    def edges(self):
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def area(self):
        xy, _ = self.triangle_coords()
        return float(np.sum(_signed_area(xy)))


def _signed_area(xy):
    a, b, c = xy[:, 0], xy[:, 1], xy[:, 2]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def triangle_angles(mesh):
    """(M, 3) interior angles in degrees."""
    xy, _ = mesh.triangle_coords()
    out = np.empty((len(xy), 3))
    for i in range(3):
        p, q, r = xy[:, i], xy[:, (i + 1) % 3], xy[:, (i + 2) % 3]
        u, v = q - p, r - p
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
        out[:, i] = np.degrees(np.arctan2(np.abs(cross), dot))
    return out


def min_angle(mesh):
    return float(triangle_angles(mesh).min())


def euler_characteristic(mesh):
    e, _ = mesh.edges()
    return mesh.n_vertices - len(e) + mesh.n_triangles


def quality_problems(mesh, min_degrees=15.0):
    """List of violated mesh invariants (empty when the mesh is sound)."""
    out = []
    xy, _ = mesh.triangle_coords()
    area = _signed_area(xy)
    if np.any(area <= 0):
        out.append(f"{int(np.sum(area <= 0))} triangles are inverted or degenerate")
    e, counts = mesh.edges()
    if np.any(counts > 2):
        out.append(f"{int(np.sum(counts > 2))} edges are shared by more than two triangles")
    bnd = e[counts == 1]
    if np.any(mesh.tags[bnd] == INTERIOR):
        out.append("an edge with a single triangle touches an interior vertex")
    bnd_vertices = np.unique(bnd)
    if len(bnd) != len(bnd_vertices) or len(bnd_vertices) != np.count_nonzero(mesh.boundary):
        out.append("boundary edges do not form closed loops through every boundary vertex")
    if np.any(np.bincount(bnd.ravel(), minlength=mesh.n_vertices)[mesh.boundary] != 2):
        out.append("a boundary vertex does not have exactly two boundary edges")
    expected = 1 - mesh.n_holes
    chi = mesh.n_vertices - len(e) + mesh.n_triangles
    if chi != expected:
        out.append(f"Euler characteristic {chi}, expected {expected}")
    for k in range(len(mesh.radii)):
        if mesh.radii[k] > 0 and np.count_nonzero(mesh.tags == k + 1) < 32:
            out.append(f"hole {k} rim has fewer than 32 vertices")
    ang = triangle_angles(mesh).min()
    if ang < min_degrees:
        out.append(f"minimum angle {ang:.2f} degrees below {min_degrees}")
    return out


def check_mesh(mesh, min_degrees=15.0):
    problems = quality_problems(mesh, min_degrees)
    if problems:
        raise AssemblyError("invalid mesh: " + "; ".join(problems))
    return mesh


# structured patches


def _ring_count(inner, outer, ratio):
    return max(1, int(math.ceil(math.log(outer / inner) / math.log(ratio) - 1e-9)))


def _patch(radius, outer, n, ratio, layers=None):
    """Staggered log-polar rings from `radius` to `outer`.

    Returns local offsets, triangles (local indices) and the index range of the
    outermost ring.  radius == 0 closes the patch with a small unstructured cap.
    """
    if radius > 0:
        inner = radius
    else:
        # grade three decades below the patch radius, then close with a cap
        inner = outer * 1e-3
    L = layers or _ring_count(inner, outer, ratio)
    q = (outer / inner) ** (1.0 / L)
    j = np.arange(L + 1)
    rad = inner * q**j
    rad[-1] = outer
    ang = (2.0 * math.pi / n) * (np.arange(n)[None, :] + 0.5 * j[:, None])
    pts = np.stack([rad[:, None] * np.cos(ang), rad[:, None] * np.sin(ang)], axis=-1).reshape(-1, 2)
    tris = []
    i = np.arange(n)
    for r in range(L):
        a = r * n + i
        a1 = r * n + (i + 1) % n
        b = (r + 1) * n + i
        b1 = (r + 1) * n + (i + 1) % n
        tris.append(np.stack([a, b, a1], axis=1))
        tris.append(np.stack([a1, b, b1], axis=1))
    tris = np.concatenate(tris)
    if radius == 0:
        cap_pts, cap_tris = _cap(inner, n, first_index=len(pts))
        pts = np.concatenate([pts, cap_pts])
        tris = np.concatenate([tris, cap_tris])
    return pts, tris, (L * n, (L + 1) * n)


def _cap(radius, n, first_index):
    """Fill the disk inside the innermost ring (patch vertices 0..n-1).

    A relaxed quasi-uniform disk mesh whose boundary nodes coincide with that ring,
    built on the unit disk and scaled, so it is exact at any radius.
    """
    free, outer, fixed = _far_field(np.zeros((0, 2)), [], [], 2 * math.pi / n, [], 60, 0, n_outer=n)
    allp = np.concatenate([fixed, free])
    tris = _domain_delaunay(allp, [], [])
    mapping = np.concatenate([np.arange(n), first_index + np.arange(len(free))])
    return radius * free, mapping[tris]


# far field


def _sizing(centers, patch_radius, chords, h_far, growth=0.3):
    def h(p):
        out = np.full(len(p), h_far)
        for c, R, ch in zip(centers, patch_radius, chords):
            dist = np.hypot(p[:, 0] - c[0], p[:, 1] - c[1])
            out = np.minimum(out, ch + growth * np.maximum(dist - R, 0.0))
        return out

    return h


def _far_field(centers, patch_radius, chords, h_far, ring_pts, iterations, seed, n_outer=None):
    """Relaxed Delaunay points filling the disk outside all patches.

    Returns (free points, outer boundary points).
    """
    rng = np.random.default_rng(seed)
    hfun = _sizing(centers, patch_radius, chords, h_far)
    n_out = n_outer or max(32, int(math.ceil(2 * math.pi / h_far - 1e-9)))
    t = 2 * np.pi * np.arange(n_out) / n_out
    outer = np.stack([np.cos(t), np.sin(t)], 1)
    fixed = np.concatenate([outer] + ring_pts) if ring_pts else outer
    h0 = min(chords) if len(chords) else h_far
    h0 = min(h0, h_far)

    def allowed(p, margin=0.65):
        hp = hfun(p)
        ok = np.hypot(p[:, 0], p[:, 1]) <= 1.0 - margin * hp
        for c, R, ch in zip(centers, patch_radius, chords):
            ok &= np.hypot(p[:, 0] - c[0], p[:, 1] - c[1]) >= R + margin * hp
        return ok

    # hexagonal seed lattice thinned by the sizing function
    dy = h0 * math.sqrt(3) / 2
    ys = np.arange(-1.0, 1.0 + dy, dy)
    xs = np.arange(-1.0, 1.0 + h0, h0)
    X, Y = np.meshgrid(xs, ys)
    X = X + (np.arange(len(ys))[:, None] % 2) * h0 / 2
    p = np.stack([X.ravel(), Y.ravel()], 1)
    p = p[allowed(p)]
    keep = rng.random(len(p)) < (h0 / hfun(p)) ** 2
    p = p[keep]
    nf = len(fixed)

    def project(p):
        hp = hfun(p)
        r = np.hypot(p[:, 0], p[:, 1])
        lim = 1.0 - 0.65 * hp
        out = r > lim
        p[out] *= (lim[out] / r[out])[:, None]
        for c, R, ch in zip(centers, patch_radius, chords):
            off = p - c
            dist = np.hypot(off[:, 0], off[:, 1])
            lim = R + 0.65 * hfun(p)
            inside = dist < lim
            p[inside] = c + off[inside] * (lim[inside] / np.maximum(dist[inside], 1e-300))[:, None]
        return p

    dt, fscale = 0.2, 1.2
    last = None
    for _ in range(iterations):
        allp = np.concatenate([fixed, p])
        # retriangulate only after noticeable motion, as in distmesh
        if last is None or np.max(np.hypot(*(p - last).T) / hfun(p)) > 0.1:
            last = p.copy()
            tri = _domain_delaunay(allp, centers, patch_radius)
            e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            e.sort(axis=1)
            e = np.unique(e, axis=0)
        vec = allp[e[:, 0]] - allp[e[:, 1]]
        L = np.hypot(vec[:, 0], vec[:, 1])
        hb = hfun(0.5 * (allp[e[:, 0]] + allp[e[:, 1]]))
        L0 = hb * fscale * math.sqrt(np.sum(L**2) / np.sum(hb**2))
        F = np.maximum(L0 - L, 0.0)
        fv = (F / L)[:, None] * vec
        ftot = np.zeros_like(allp)
        np.add.at(ftot, e[:, 0], fv)
        np.add.at(ftot, e[:, 1], -fv)
        step = dt * ftot[nf:]
        p = project(p + step)
        if np.max(np.hypot(step[:, 0], step[:, 1]) / hfun(p)) < 1e-3:
            break
    return p, outer, fixed


def _domain_delaunay(points, centers, patch_radius):
    tri = Delaunay(points).simplices
    cen = points[tri].mean(axis=1)
    ok = np.hypot(cen[:, 0], cen[:, 1]) < 1.0
    for c, R in zip(centers, patch_radius):
        ok &= np.hypot(cen[:, 0] - c[0], cen[:, 1] - c[1]) > R
    return tri[ok]


def estimate_vertices(radii, patch_radius, grading):
    q = grading.ring_ratio
    n = 0
    for r, R in zip(radii, patch_radius):
        inner = r if r > 0 else R * 1e-3
        n += (_ring_count(inner, R, q) + 1) * grading.n_theta
    n += int(4.0 / grading.target_h_far**2)
    return n


def triangulate_domain(centers, radii, grading=None, patch_radius=None, budget=VERTEX_BUDGET):
    """Mesh the unit disk minus the disks B(centers[k], radii[k]).

    radii[k] == 0 keeps the point centers[k] inside the domain but still grades
    the mesh toward it (used for unpierced control meshes).
    """
    grading = grading or GradingSpec()
    centers = np.atleast_2d(np.asarray(centers, dtype=float)).reshape(-1, 2)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    m = len(centers)
    n = grading.n_theta
    if patch_radius is None:
        patch_radius = default_patch_radius(centers, grading)
    patch_radius = np.asarray(patch_radius, dtype=float)
    for k in range(m):
        if radii[k] >= patch_radius[k] / grading.ring_ratio:
            raise ValueError(f"hole {k} radius {radii[k]:.3e} leaves no room for a graded patch")
    est = estimate_vertices(radii, patch_radius, grading)
    if est > budget:
        raise ResourceError(
            f"mesh would need about {est} vertices (budget {budget}); use a larger eps or a coarser target_h_far"
        )

    verts, local, anchor, tags, tris = [], [], [], [], []
    ring_pts, ring_idx = [], []
    offset = 0
    for k in range(m):
        pts, t, (lo, hi) = _patch(radii[k], patch_radius[k], n, grading.ring_ratio, grading.layers)
        tg = np.zeros(len(pts), dtype=int)
        if radii[k] > 0:
            tg[:n] = k + 1
        verts.append(centers[k] + pts)
        local.append(pts)
        anchor.append(np.full(len(pts), k))
        tags.append(tg)
        tris.append(t + offset)
        ring_pts.append(centers[k] + pts[lo:hi])
        ring_idx.append(offset + np.arange(lo, hi))
        offset += len(pts)

    chords = [2 * math.pi * R / n for R in patch_radius]
    free, outer, fixed = _far_field(
        centers, patch_radius, chords, grading.target_h_far, ring_pts, grading.relax_iterations, grading.seed
    )
    outer_idx = offset + np.arange(len(outer))
    free_idx = offset + len(outer) + np.arange(len(free))
    verts += [outer, free]
    local += [np.zeros_like(outer), np.zeros_like(free)]
    anchor += [np.full(len(outer), -1), np.full(len(free), -1)]
    tags += [np.full(len(outer), OUTER), np.zeros(len(free), dtype=int)]

    allp = np.concatenate([fixed, free])
    far_tri = _domain_delaunay(allp, centers, patch_radius)
    mapping = np.concatenate([outer_idx] + ring_idx + [free_idx])
    tris.append(mapping[far_tri])

    mesh = Mesh(
        vertices=np.concatenate(verts),
        triangles=np.concatenate(tris).astype(np.int64),
        tags=np.concatenate(tags),
        anchor=np.concatenate(anchor),
        local=np.concatenate(local),
        centers=centers,
        radii=radii,
        patch_radius=patch_radius,
    )
    return check_mesh(_orient(mesh))


def default_patch_radius(centers, grading):
    """Half the annulus radius, capped where ring chords reach target_h_far."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    out = 1.0 - np.hypot(centers[:, 0], centers[:, 1])
    for i in range(len(centers)):
        for j in range(len(centers)):
            if i != j:
                out[i] = min(out[i], 0.5 * math.dist(centers[i], centers[j]))
    cap = grading.target_h_far * grading.n_theta / (2 * math.pi)
    return np.minimum(0.5 * out, cap)


def _orient(mesh):
    xy, _ = mesh.triangle_coords()
    flip = _signed_area(xy) < 0
    if np.any(flip):
        t = mesh.triangles.copy()
        t[flip] = t[flip][:, [0, 2, 1]]
        mesh = Mesh(mesh.vertices, t, mesh.tags, mesh.anchor, mesh.local, mesh.centers, mesh.radii, mesh.patch_radius)
    return mesh


def triangulate(cfg, scales, grading=None):
    """Graded mesh of the pierced disk for a configuration at one eps."""
    return triangulate_domain(cfg.centers, scales.hole_radius, grading)


def graded_disk(centers, grading=None):
    """Unpierced disk, graded toward the given points like a pierced mesh would be."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    return triangulate_domain(centers, np.zeros(len(centers)), grading)


def disk_mesh(h, seed=0):
    """Quasi-uniform mesh of the whole unit disk with element size about h."""
    free, outer, fixed = _far_field(np.zeros((0, 2)), [], [], h, [], 80, seed)
    allp = np.concatenate([fixed, free])
    tri = _domain_delaunay(allp, [], [])
    n = len(allp)
    tags = np.zeros(n, dtype=int)
    tags[: len(outer)] = OUTER
    mesh = Mesh(allp, tri.astype(np.int64), tags, np.full(n, -1), np.zeros((n, 2)), np.zeros((0, 2)), np.zeros(0),
                np.zeros(0))
    return check_mesh(_orient(mesh))


def refine(mesh, budget=VERTEX_BUDGET):
    """Split every triangle into four; new boundary nodes are put back on their circles."""
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    es = np.sort(e, axis=1)
    uniq, inv, counts = np.unique(es, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    nv = mesh.n_vertices
    if nv + len(uniq) > budget:
        raise ResourceError(f"refinement would exceed the vertex budget of {budget}")
    a, b = uniq[:, 0], uniq[:, 1]
    anc = np.where(mesh.anchor[a] == mesh.anchor[b], mesh.anchor[a], -1)
    loc = np.where((anc >= 0)[:, None], 0.5 * (mesh.local[a] + mesh.local[b]), 0.0)
    glob = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
    on_bnd = counts[np.arange(len(uniq))] == 1
    tag = np.where(on_bnd & (mesh.tags[a] == mesh.tags[b]), mesh.tags[a], INTERIOR)
    # hole rims: snap in the patch frame
    for k in range(len(mesh.radii)):
        sel = tag == k + 1
        if not np.any(sel):
            continue
        off = np.where((anc[sel] == k)[:, None], loc[sel], glob[sel] - mesh.centers[k])
        off *= (mesh.radii[k] / np.hypot(off[:, 0], off[:, 1]))[:, None]
        loc[sel] = off
        anc[sel] = k
    if len(mesh.centers):
        glob = np.where((anc >= 0)[:, None], mesh.centers[np.maximum(anc, 0)] + loc, glob)
    sel = tag == OUTER
    glob[sel] /= np.hypot(glob[sel, 0], glob[sel, 1])[:, None]

    mid = nv + inv.reshape(3, -1).T  # midpoints of edges (01, 12, 20) per triangle
    m01, m12, m20 = mid[:, 0], mid[:, 1], mid[:, 2]
    v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
    new_t = np.concatenate([
        np.stack([v0, m01, m20], 1),
        np.stack([v1, m12, m01], 1),
        np.stack([v2, m20, m12], 1),
        np.stack([m01, m12, m20], 1),
    ])
    out = Mesh(
        vertices=np.concatenate([mesh.vertices, glob]),
        triangles=new_t,
        tags=np.concatenate([mesh.tags, tag]),
        anchor=np.concatenate([mesh.anchor, anc]),
        local=np.concatenate([mesh.local, loc]),
        centers=mesh.centers,
        radii=mesh.radii,
        patch_radius=mesh.patch_radius,
    )
    return check_mesh(_orient(out))


def write_mesh(mesh, path):
    with open(path, "w") as f:
        f.write(f"vertices {mesh.n_vertices} triangles {mesh.n_triangles}\n")
        for (x, y), tag in zip(mesh.vertices, mesh.tags):
            f.write(f"{x:.17g} {y:.17g} {tag}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")


def read_mesh(path):
    """Read the plain-text format written by write_mesh.

    The format carries global coordinates only, so hole rims come back as
    vertices without patch offsets; hole centers and radii are recovered from
    the tagged rim vertices.
    """
    with open(path) as f:
        head = f.readline().split()
        if len(head) != 4 or head[0] != "vertices" or head[2] != "triangles":
            raise ValueError(f"{path}: expected a 'vertices N triangles M' header")
        nv, nt = int(head[1]), int(head[3])
        data = np.loadtxt(f, max_rows=nv, ndmin=2)
        tris = np.loadtxt(f, max_rows=nt, dtype=np.int64, ndmin=2)
    verts, tags = data[:, :2], data[:, 2].astype(int)
    m = int(tags.max()) if len(tags) and tags.max() > 0 else 0
    centers = np.zeros((m, 2))
    radii = np.zeros(m)
    for k in range(m):
        rim = verts[tags == k + 1]
        centers[k] = rim.mean(axis=0)
        radii[k] = np.hypot(*(rim - centers[k]).T).mean()
    n = len(verts)
    return Mesh(verts, tris, tags, np.full(n, -1), np.zeros((n, 2)), centers, radii, None)
