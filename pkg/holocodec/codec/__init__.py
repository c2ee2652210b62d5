"""Neural codec: hierarchical VQ model, losses, two-stage training, checkpoints, pipeline."""
from holocodec.codec.checkpoint import CodecBundle, load_checkpoint, save_checkpoint
from holocodec.codec.losses import LossWeights, ms_ssim, reconstruction_loss, ssim, watson_dft_loss
from holocodec.codec.model import CodecProfile, HoloCodec, codec_inputs, decode, encode, hierarchical_quantize
from holocodec.codec.pipeline import compress_sample, decompress_stream
from holocodec.codec.training import TrainResult, TrainSchedule, framework_loss, train, train_stage2

__all__ = [
    "CodecBundle",
    "CodecProfile",
    "HoloCodec",
    "LossWeights",
    "TrainResult",
    "TrainSchedule",
    "codec_inputs",
    "compress_sample",
    "decode",
    "decompress_stream",
    "encode",
    "framework_loss",
    "hierarchical_quantize",
    "load_checkpoint",
    "ms_ssim",
    "reconstruction_loss",
    "save_checkpoint",
    "ssim",
    "train",
    "train_stage2",
    "watson_dft_loss",
]
