"""DMF-Net: dual-branch multi-scale feature-fusion network for copy-forgery
identification of anti-counterfeiting QR codes.

The heavy lifting lives in the compiled extension; this package re-exports it.
"""

from ._core import (
    DmfnetError,
    Network,
    avgpool,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    edge_roughness,
    gen_corpus,
    gen_qr_pattern,
    global_avgpool,
    lr_at,
    out_shape,
    relu,
    relu_backward,
    render_copied,
    render_genuine,
    run_gradcheck,
    softmax_cross_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "DmfnetError",
    "Network",
    "avgpool",
    "concat_channels",
    "conv2d_backward",
    "conv2d_forward",
    "edge_roughness",
    "gen_corpus",
    "gen_qr_pattern",
    "global_avgpool",
    "lr_at",
    "out_shape",
    "relu",
    "relu_backward",
    "render_copied",
    "render_genuine",
    "run_gradcheck",
    "softmax_cross_entropy",
]
