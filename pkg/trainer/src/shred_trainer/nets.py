"""Set-abstraction point networks for the three scorers.

Specs carry the reference-scale layer sizes; a shrink factor divides widths
and grouping points down to desk scale. The split and fix nets are per-point
segmentation networks (abstraction pyramid plus feature propagation), the
merge net is a classifier with a global pooling stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

SPLIT_SLOTS = 10


@dataclass(frozen=True)
class NetSpec:
    kind: str
    in_channels: int
    sa_points: tuple[int, ...]
    sa_radii: tuple[float, ...]
    sa_widths: tuple[int, ...]
    head_widths: tuple[int, ...]
    out_dim: int
    dropout: float
    batch_norm: bool
    fp_width: int = 0  # per-point feature width after propagation (seg nets)
    global_width: int = 0  # pooled feature width (classifier nets)
    nsample: int = 32
    shrink: int = 4
    point_shrink: int = 8  # grouping-point divisor; sampling dominates CPU cost

    def __post_init__(self) -> None:
        if self.kind == "split" and self.out_dim != SPLIT_SLOTS:
            raise ValueError("split head must emit 10 slots")
        if self.kind in ("fix", "merge") and self.out_dim != 1:
            raise ValueError(f"{self.kind} head must emit 1 logit")
        if len(self.sa_points) != len(self.sa_radii) != len(self.sa_widths):
            raise ValueError("set-abstraction schedules must align")

    def desk_points(self) -> tuple[int, ...]:
        return tuple(max(2, p // self.point_shrink) for p in self.sa_points)

    def desk_widths(self) -> tuple[int, ...]:
        return tuple(max(4, w // self.shrink) for w in self.sa_widths)

    def desk_fp_width(self) -> int:
        return max(4, self.fp_width // self.shrink)

    def desk_global_width(self) -> int:
        return max(8, self.global_width // self.shrink)

    def desk_head_widths(self) -> tuple[int, ...]:
        return tuple(max(4, w // self.shrink) for w in self.head_widths)


def default_spec(kind: str, shrink: int = 4) -> NetSpec:
    if kind == "split":
        return NetSpec(
            kind="split", in_channels=6,
            sa_points=(1024, 256, 64, 16), sa_radii=(0.1, 0.2, 0.4, 0.8),
            sa_widths=(64, 128, 256, 512), fp_width=128,
            head_widths=(64,), out_dim=SPLIT_SLOTS, dropout=0.1, batch_norm=True,
            shrink=shrink,
        )
    if kind == "fix":
        return NetSpec(
            kind="fix", in_channels=7,
            sa_points=(1024, 256, 64, 16), sa_radii=(0.1, 0.2, 0.4, 0.8),
            sa_widths=(64, 128, 256, 512), fp_width=128,
            head_widths=(64, 32), out_dim=1, dropout=0.1, batch_norm=False,
            shrink=shrink,
        )
    if kind == "merge":
        return NetSpec(
            kind="merge", in_channels=8,
            sa_points=(1024, 256, 64), sa_radii=(0.1, 0.2, 0.4),
            sa_widths=(64, 128, 256), global_width=1024,
            head_widths=(256, 64), out_dim=1, dropout=0.0, batch_norm=True,
            shrink=shrink,
        )
    raise ValueError(f"unknown net kind {kind!r}")


# ---------------------------------------------------------------------------
# Point utilities


def square_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Pairwise squared distances between (B, N, 3) and (B, M, 3)."""
    return torch.cdist(a, b) ** 2


def index_points(points: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
    """Gather (B, ..., C) rows of `points` (B, N, C) by integer index tensor."""
    batch = torch.arange(points.shape[0], device=points.device)
    batch = batch.view(-1, *([1] * (idx.dim() - 1))).expand_as(idx)
    return points[batch, idx]


def farthest_point_sample(xyz: torch.Tensor, npoint: int) -> torch.Tensor:
    """(B, N, 3) -> (B, npoint) indices, deterministic (starts at point 0)."""
    b, n, _ = xyz.shape
    npoint = min(npoint, n)
    idx = torch.zeros(b, npoint, dtype=torch.long, device=xyz.device)
    dist = torch.full((b, n), float("inf"), device=xyz.device)
    farthest = torch.zeros(b, dtype=torch.long, device=xyz.device)
    for i in range(npoint):
        idx[:, i] = farthest
        centroid = xyz[torch.arange(b), farthest].unsqueeze(1)
        d = ((xyz - centroid) ** 2).sum(-1)
        dist = torch.minimum(dist, d)
        farthest = dist.argmax(-1)
    return idx


def ball_group(
    xyz: torch.Tensor, centers: torch.Tensor, radius: float, nsample: int
) -> torch.Tensor:
    """(B, M, nsample) neighbor indices within `radius`, padded with the closest point."""
    d2 = square_distance(centers, xyz)  # (B, M, N)
    k = min(nsample, xyz.shape[1])
    d2_near, idx = d2.topk(k, dim=-1, largest=False)
    inside = d2_near <= radius * radius
    first = idx[:, :, :1].expand_as(idx)
    return torch.where(inside, idx, first)


# ---------------------------------------------------------------------------
# Layers


class SetAbstraction(nn.Module):
    """Sample centers, group a radius neighborhood, run a shared MLP, max-pool.

    `sampling` is 'fps' or 'stride'; strided center selection keeps dense
    first layers affordable on CPU without touching the architecture.
    """

    def __init__(self, npoint, radius, nsample, in_channels, width, batch_norm,
                 sampling="fps"):
        super().__init__()
        self.npoint = npoint
        self.radius = radius
        self.nsample = nsample
        self.sampling = sampling
        layers: list[nn.Module] = [nn.Conv2d(in_channels + 3, width, 1)]
        if batch_norm:
            layers.append(nn.BatchNorm2d(width))
        layers += [nn.ReLU(), nn.Conv2d(width, width, 1)]
        if batch_norm:
            layers.append(nn.BatchNorm2d(width))
        layers.append(nn.ReLU())
        self.mlp = nn.Sequential(*layers)

    def forward(self, xyz, feats):
        n = xyz.shape[1]
        if self.sampling == "stride":
            idx = torch.linspace(0, n - 1, min(self.npoint, n), device=xyz.device)
            centers_idx = idx.long().unsqueeze(0).expand(xyz.shape[0], -1)
        else:
            centers_idx = farthest_point_sample(xyz, self.npoint)
        centers = index_points(xyz, centers_idx)
        group = ball_group(xyz, centers, self.radius, self.nsample)
        grouped_xyz = index_points(xyz, group) - centers.unsqueeze(2)
        grouped = torch.cat([grouped_xyz, index_points(feats, group)], dim=-1)
        x = self.mlp(grouped.permute(0, 3, 1, 2))
        return centers, x.max(dim=-1).values.permute(0, 2, 1)


class GlobalAbstraction(nn.Module):
    """Single group over every point, pooled to one feature vector."""

    def __init__(self, in_channels, width, batch_norm):
        super().__init__()
        layers: list[nn.Module] = [nn.Conv1d(in_channels + 3, width, 1)]
        if batch_norm:
            layers.append(nn.BatchNorm1d(width))
        layers += [nn.ReLU(), nn.Conv1d(width, width, 1)]
        if batch_norm:
            layers.append(nn.BatchNorm1d(width))
        layers.append(nn.ReLU())
        self.mlp = nn.Sequential(*layers)

    def forward(self, xyz, feats):
        x = torch.cat([xyz, feats], dim=-1).permute(0, 2, 1)
        return self.mlp(x).max(dim=-1).values


class FeaturePropagation(nn.Module):
    """Inverse-distance interpolation from sparse to dense, then a shared MLP."""

    def __init__(self, in_channels, width, batch_norm):
        super().__init__()
        layers: list[nn.Module] = [nn.Conv1d(in_channels, width, 1)]
        if batch_norm:
            layers.append(nn.BatchNorm1d(width))
        layers += [nn.ReLU()]
        self.mlp = nn.Sequential(*layers)

    def forward(self, xyz_dense, xyz_sparse, feats_dense, feats_sparse):
        d2 = square_distance(xyz_dense, xyz_sparse)
        k = min(3, xyz_sparse.shape[1])
        d2_near, idx = d2.topk(k, dim=-1, largest=False)
        weight = 1.0 / (d2_near + 1e-8)
        weight = weight / weight.sum(dim=-1, keepdim=True)
        interp = (index_points(feats_sparse, idx) * weight.unsqueeze(-1)).sum(dim=2)
        if feats_dense is not None:
            interp = torch.cat([interp, feats_dense], dim=-1)
        return self.mlp(interp.permute(0, 2, 1)).permute(0, 2, 1)


class SegmentationNet(nn.Module):
    """Abstraction pyramid + propagation + per-point head (split and fix nets)."""

    def __init__(self, spec: NetSpec):
        super().__init__()
        self.spec = spec
        points = spec.desk_points()
        widths = spec.desk_widths()
        bn = spec.batch_norm
        self.sa_layers = nn.ModuleList()
        in_ch = spec.in_channels
        for i, (npoint, radius, width) in enumerate(zip(points, spec.sa_radii, widths)):
            sampling = "stride" if i == 0 else "fps"
            self.sa_layers.append(
                SetAbstraction(npoint, radius, spec.nsample, in_ch, width, bn, sampling)
            )
            in_ch = width
        fp_width = spec.desk_fp_width()
        dense_widths = [spec.in_channels] + list(widths[:-1])
        self.fp_layers = nn.ModuleList()
        sparse_w = widths[-1]  # propagate deepest -> shallowest
        for dense_w in reversed(dense_widths):
            self.fp_layers.append(FeaturePropagation(dense_w + sparse_w, fp_width, bn))
            sparse_w = fp_width
        head: list[nn.Module] = []
        in_w = fp_width
        for w in spec.desk_head_widths():
            head += [nn.Conv1d(in_w, w, 1), nn.ReLU()]
            if spec.dropout > 0:
                head.append(nn.Dropout(spec.dropout))
            in_w = w
        head.append(nn.Conv1d(in_w, spec.out_dim, 1))
        self.head = nn.Sequential(*head)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """(B, N, C) features with xyz first -> per-point logits (B, N, out)."""
        xyz = features[..., :3].contiguous()
        levels = [(xyz, features)]
        feats = features
        for sa in self.sa_layers:
            xyz, feats = sa(xyz, feats)
            levels.append((xyz, feats))
        sparse_xyz, sparse_feats = levels[-1]
        for fp, (dense_xyz, dense_feats) in zip(self.fp_layers, reversed(levels[:-1])):
            sparse_feats = fp(dense_xyz, sparse_xyz, dense_feats, sparse_feats)
            sparse_xyz = dense_xyz
        return self.head(sparse_feats.permute(0, 2, 1)).permute(0, 2, 1)


class ClassifierNet(nn.Module):
    """Abstraction pyramid + global pooling + shape-level head (merge net)."""

    def __init__(self, spec: NetSpec):
        super().__init__()
        self.spec = spec
        points = spec.desk_points()
        widths = spec.desk_widths()
        bn = spec.batch_norm
        self.sa_layers = nn.ModuleList()
        in_ch = spec.in_channels
        for i, (npoint, radius, width) in enumerate(zip(points, spec.sa_radii, widths)):
            sampling = "stride" if i == 0 else "fps"
            self.sa_layers.append(
                SetAbstraction(npoint, radius, spec.nsample, in_ch, width, bn, sampling)
            )
            in_ch = width
        self.pool = GlobalAbstraction(in_ch, spec.desk_global_width(), bn)
        head: list[nn.Module] = []
        in_w = spec.desk_global_width()
        for w in spec.desk_head_widths():
            head += [nn.Linear(in_w, w), nn.ReLU()]
            if spec.dropout > 0:
                head.append(nn.Dropout(spec.dropout))
            in_w = w
        head.append(nn.Linear(in_w, spec.out_dim))
        self.head = nn.Sequential(*head)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """(B, N, C) -> (B, out) logits."""
        xyz = features[..., :3].contiguous()
        feats = features
        for sa in self.sa_layers:
            xyz, feats = sa(xyz, feats)
        pooled = self.pool(xyz, feats)
        return self.head(pooled)


def build_net(spec: NetSpec) -> nn.Module:
    if spec.kind in ("split", "fix"):
        return SegmentationNet(spec)
    return ClassifierNet(spec)
