"""Hyperspectral image restoration: subspace denoising and inpainting."""

__version__ = "0.1.0"

from .cube import (
    BandScaling,
    HsiCube,
    ObservationMask,
    denormalize_bands,
    load_cube,
    load_mask,
    normalize_bands,
    save_cube,
    save_mask,
)
from .errors import (
    ConditioningError,
    DataError,
    DegenerateBandError,
    DomainError,
    FormatError,
    HsiError,
    LengthError,
    RankError,
    ShapeError,
    UnderdeterminedError,
)
from .fasthyde import (
    DenoiseRequest,
    DenoiseResult,
    denoise_bandwise,
    fasthyde_iid,
    fasthyde_noniid,
    fasthyde_poisson,
)
from .fasthyin import (
    InpaintRequest,
    fasthyin_diag,
    fasthyin_iid,
    fasthyin_noniid,
    fasthyin_poisson,
    recover_pixel_ls,
    recover_pixel_wls,
)
from .metrics import QualityReport, psnr_band, report, ssim_band
from .patch import DenoiserSpec, aggregate, block_match, collaborative_filter_group, denoise_band
from .simulate import (
    Case1,
    Case2,
    Case3,
    add_case1,
    add_case2,
    add_case3,
    make_ground_truth,
    make_stripe_mask,
)
from .subspace import (
    DiagonalNoise,
    EigenImages,
    FullNoise,
    IidNoise,
    SubspaceBasis,
    estimate_noise,
    learn_subspace,
    project,
    reconstruct,
    select_dimension,
)
from .transforms import (
    WhiteningOperator,
    anscombe,
    build_whitener,
    inverse_anscombe,
    unwhiten,
    whiten,
    whiten_masked_pixel,
)
