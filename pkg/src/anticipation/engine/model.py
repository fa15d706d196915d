"""Full model assembly: semantics -> fusion -> encoder -> GRU decoder.

The decoder hidden size equals the encoder output dimension, which in
turn equals the fused feature dimension.  The decoder input at every
iteration is the last fused token (for attention fusion, the appended
attended token, which occupies the terminal position).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.protocol import ProtocolError
from ..decoder import AnticipationResult, ClassifierParams, GruCellParams, anticipate
from ..encoder import EncoderConfig, EncoderParams, encode
from ..fusion import FusionConfig, FusionParams, fuse, fused_dim
from ..layers import Linear
from ..numcore import Rng, Tensor, no_grad, softmax
from ..objective import LossConfig, combined_loss, cosine_distance_loss, \
    smooth_cross_entropy, squared_error_loss
from ..semantics import (
    SemanticConfig,
    SemanticMatrix,
    SemanticMlp,
    argmax_semantic,
    classify_observation,
    lookup_semantic,
    mixture_semantic,
    mlp_semantic,
    topk_semantic,
)


class ModelBuildError(ValueError):
    pass


@dataclass
class ForwardOutput:
    scores: Tensor  # (B, N)
    steps_run: int
    obs_logits: Tensor | None = None
    obs_probs: Tensor | None = None
    semantic: Tensor | None = None  # the vector that entered fusion


class AnticipationModel:
    def __init__(
        self,
        matrix: SemanticMatrix,
        sem_cfg: SemanticConfig,
        fusion_cfg: FusionConfig,
        enc_cfg: EncoderConfig,
        d_v: int,
        s_ant: int,
        rng: Rng,
    ):
        self.matrix = matrix
        self.sem_cfg = sem_cfg
        self.fusion_cfg = fusion_cfg
        self.enc_cfg = enc_cfg
        self.d_v = d_v
        self.s_ant = s_ant
        n, d_s = matrix.n_classes, matrix.dim

        if sem_cfg.variant == "none":
            self.d_x = d_v
            self.fusion = None
        else:
            self.d_x = fused_dim(fusion_cfg, d_v, d_s)
            self.fusion = FusionParams.init(fusion_cfg, d_v, d_s, rng.child("fusion"))

        self.obs_clf = None
        self.sem_mlp = None
        if sem_cfg.estimated:
            self.obs_clf = Linear.init(rng.child("obs_clf"), d_v, n)
            if sem_cfg.variant == "mlp":
                self.sem_mlp = SemanticMlp.init(
                    rng.child("sem_mlp"), d_v, d_s, sem_cfg.mlp_hidden
                )
        self.top_k = sem_cfg.resolve_top_k(n) if sem_cfg.variant == "pw" else None

        self.encoder = EncoderParams.init(enc_cfg, self.d_x, rng.child("encoder"))
        self.gru = GruCellParams.init(rng.child("gru"), self.d_x, self.d_x)
        self.classifier = ClassifierParams.init(
            rng.child("classifier"), self.d_x, n
        )

    @property
    def n_classes(self) -> int:
        return self.matrix.n_classes

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        if self.obs_clf is not None:
            out.update(self.obs_clf.params("obs_clf"))
        if self.sem_mlp is not None:
            out.update(self.sem_mlp.params("sem_mlp"))
        if self.fusion is not None:
            out.update(self.fusion.params("fusion"))
        out.update(self.encoder.params("encoder"))
        out.update(self.gru.params("gru"))
        out.update(self.classifier.params("classifier"))
        return out

    def _semantic(self, feats: Tensor, obs_labels):
        """Returns (semantic vector, obs logits, obs probs) per variant."""
        cfg = self.sem_cfg
        if cfg.variant == "none":
            return None, None, None
        if cfg.variant == "gts":
            if obs_labels is None:
                raise ModelBuildError(
                    "ground-truth semantics require observed-action labels"
                )
            return lookup_semantic(self.matrix, obs_labels), None, None
        logits, probs = classify_observation(self.obs_clf, feats)
        if cfg.variant == "fw":
            sem = mixture_semantic(probs, self.matrix)
        elif cfg.variant == "pw":
            sem = topk_semantic(logits, self.matrix, self.top_k)
        elif cfg.variant == "nei":
            sem = argmax_semantic(logits, self.matrix)
        else:  # mlp
            sem = mlp_semantic(self.sem_mlp, feats)
        return sem, logits, probs

    def forward(
        self,
        feats: np.ndarray,
        obs_labels: np.ndarray | None,
        n: int,
        drop_rng: Rng | None = None,
    ) -> ForwardOutput:
        feats_t = Tensor(np.asarray(feats, dtype=np.float64))
        if feats_t.ndim != 3:
            raise ProtocolError(f"expected (B, T, d_v) features, got {feats_t.shape}")
        sem, obs_logits, obs_probs = self._semantic(feats_t, obs_labels)
        fused = feats_t if sem is None else fuse(sem, feats_t, self.fusion)
        x_last = fused[:, -1, :]
        _, summary = encode(self.encoder, self.enc_cfg, fused, drop_rng)
        result: AnticipationResult = anticipate(
            self.gru, self.classifier, summary, x_last, n, self.s_ant
        )
        return ForwardOutput(
            scores=result.scores,
            steps_run=result.steps_run,
            obs_logits=obs_logits,
            obs_probs=obs_probs,
            semantic=sem,
        )

    def scores(self, feats, obs_labels, n: int) -> np.ndarray:
        """Inference scores (B, N) with no tape."""
        with no_grad():
            return self.forward(feats, obs_labels, n).scores.data

    def loss(
        self,
        feats: np.ndarray,
        obs_labels: np.ndarray,
        target_labels: np.ndarray,
        n: int,
        loss_cfg: LossConfig,
        drop_rng: Rng | None = None,
    ) -> tuple[Tensor, dict[str, float], ForwardOutput]:
        out = self.forward(feats, obs_labels, n, drop_rng)
        target_probs = softmax(out.scores, axis=-1)
        parts: dict[str, Tensor] = {
            "target": smooth_cross_entropy(
                target_probs, target_labels, loss_cfg.theta
            )
        }
        if loss_cfg.mode == "es":
            if out.obs_probs is None or out.semantic is None:
                raise ModelBuildError(
                    "es loss needs an estimated-semantic variant "
                    f"(model has {self.sem_cfg.variant!r})"
                )
            truth = lookup_semantic(self.matrix, obs_labels)
            parts["observation"] = smooth_cross_entropy(
                out.obs_probs, obs_labels, loss_cfg.theta
            )
            parts["cosine"] = cosine_distance_loss(out.semantic, truth)
            parts["squared"] = squared_error_loss(out.semantic, truth)
        total = combined_loss(loss_cfg, parts)
        scalars = {k: v.item() for k, v in parts.items()}
        scalars["total"] = total.item()
        return total, scalars, out
