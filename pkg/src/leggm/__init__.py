"""Edge-gradient Gabor-magnitude face descriptor pipeline.

Stages: image loading and illumination flattening (`imaging`), band-pass
structural pattern extraction (`pisp`), the complex kernel family
(`gabor`) applied through spectrum products (`spectral`), the descriptor
chain and feature files (`descriptor`), subspace learning and model files
(`subspace`), gallery matching (`recognition`), metrics and the protocol
runner (`evaluation`), plus a synthetic corpus (`synth`) and a CLI (`cli`).
"""

from .config import PipelineConfig, load_config, parse_config
from .descriptor import (
    DescriptorParams,
    augment,
    downsample,
    extract,
    gabor_transform,
    read_features,
    write_features,
    znorm,
)
from .evaluation import (
    DatasetManifest,
    EvalReport,
    RocPoint,
    cmc,
    eer,
    load_manifest,
    roc,
    run_protocol,
    vr_at_far,
)
from .gabor import GaborBank, GaborParams, build_bank, gabor_kernel
from .imaging import (
    decode_image,
    encode_pgm,
    illum_normalize,
    load_image,
    resize_bilinear,
)
from .pisp import PispParams, conv2_replicate, dog_kernel, embed, extract_pisp
from .recognition import Gallery, Match, identify, similarity, verify_scores
from .spectral import conv_freq, fft2, highfreq_energy_ratio, ifft2, magnitude
from .subspace import (
    SubspaceModel,
    fit_lsda,
    fit_pca,
    fit_pca_lda,
    fit_slpp,
    geneig_sym,
    load_model,
    project,
    save_model,
)
from .synth import synth_dataset

__version__ = "0.1.0"
