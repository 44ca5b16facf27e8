"""Gammatonegram-based isolated-word speech classification toolkit."""

from .audio_io import (AudioClip, CorpusManifest, SynthConfig,
                       UtteranceRecord, load_manifest, load_wav,
                       save_manifest, synth_corpus, write_wav)
from .dsp import (FrameMatrix, Spectrogram, StftConfig, fft_magnitude,
                  frame_signal, hamming_window, pre_emphasis, spectrogram)
from .gammatone import (GammatoneFilterbank, Gammatonegram, erb_bandwidth,
                        erb_space, gammatone_weights, gammatonegram)
from .nn import (Checkpoint, Hyper, NetworkSpec, forward, gammanet_s,
                 grad_check, init_network, load_checkpoint, predict,
                 save_checkpoint, train, transfer_head)
from .render import (RgbImage, colormap, power_to_db_norm, read_ppm,
                     render_image, resize_bilinear, write_ppm)
from .tasks import (EvalReport, Fold, FoldPlan, PipelineConfig,
                    RepresentationCache, TaskConfig, cascade_evaluate,
                    compare_representations, evaluate_wrr,
                    label_intelligibility, make_folds, run_task, split_task)
from .vad import Gmm1d, VadConfig, VadMask, fit_gmm_1d, trim_silence, vad_mask

__version__ = "0.1.0"
