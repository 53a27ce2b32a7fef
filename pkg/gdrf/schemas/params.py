"""モデルのハイパーパラメータ

既定値: N1=50, N2=5, λ=0.25。いずれも設定で上書き可能。
"""

from pydantic import BaseModel, NonNegativeFloat, NonNegativeInt, PositiveFloat, PositiveInt

from gdrf.errors import ContractViolation


class KernelParams(BaseModel):
    """Matérn 3/2 カーネルのパラメータ"""

    # 次元ごとの長さスケール。要素1つなら全次元で共有
    length_scale: tuple[PositiveFloat, ...] = (1.0,)
    scale: PositiveFloat = 1.0  # 出力分散 σ（k(0) = σ）
    noise_variance: PositiveFloat = 0.1  # ガウス尤度の分散
    jitter: PositiveFloat = 1e-8  # σ に対する相対値

    model_config = {"frozen": True}

    def length_scales_for(self, dim: int) -> tuple[float, ...]:
        if len(self.length_scale) == 1:
            return self.length_scale * dim
        if len(self.length_scale) != dim:
            raise ContractViolation(
                f"kernel has {len(self.length_scale)} length scales, locations have {dim} dims"
            )
        return self.length_scale


class TrainingSchedule(BaseModel):
    """Gibbs と SVI を交互に回す学習スケジュール"""

    n_gibbs_inner: PositiveInt = 50  # N1: 外側1回あたりのGibbsスイープ数
    n_svi_inner: PositiveInt = 5  # N2: 外側1回あたりのGP勾配ステップ数
    learning_rate: PositiveFloat = 0.25  # λ
    n_outer: PositiveInt = 100
    early_stop_patience: PositiveInt = 5
    early_stop_tol: NonNegativeFloat = 1e-4  # 観測1件あたりの対数尤度改善量
    max_backoff: NonNegativeInt = 5  # ELBOが悪化したときのステップ半減回数
    minibatch_size: PositiveInt | None = None  # None = フルバッチ
    max_inducing: PositiveInt = 512
    noise_floor: PositiveFloat = 1e-6
    warm_start: bool = False  # 毎回のGP更新前に q(v) を閉形式の最適解に置き換える

    model_config = {"frozen": True}


class Hyperparameters(BaseModel):
    n_topics: PositiveInt  # K
    vocab_size: PositiveInt  # W
    alpha: PositiveFloat = 0.1  # トピック擬似密度
    beta: PositiveFloat = 0.1  # 単語-トピックのディリクレ集中度
    kernel: KernelParams = KernelParams()
    schedule: TrainingSchedule = TrainingSchedule()

    model_config = {"frozen": True}
