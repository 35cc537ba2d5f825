"""Block-wise compressive camera simulation and reconstruction."""

from ._core import (
    Error,
    GmmModel,
    PosteriorCache,
    __version__,
    build_cache,
    csr_to_measurements,
    extract_blocks,
    invert_blocks,
    load_model,
    make_sensing_matrix,
    psnr,
    read_pgm,
    reconstruct_image,
    save_model,
    sense,
    solve_sparse,
    stitch_blocks,
    train_gmm,
    write_pgm,
)

__all__ = [
    "Error",
    "GmmModel",
    "PosteriorCache",
    "__version__",
    "build_cache",
    "csr_to_measurements",
    "extract_blocks",
    "invert_blocks",
    "load_model",
    "make_sensing_matrix",
    "psnr",
    "read_pgm",
    "reconstruct_image",
    "save_model",
    "sense",
    "solve_sparse",
    "stitch_blocks",
    "train_gmm",
    "write_pgm",
]
