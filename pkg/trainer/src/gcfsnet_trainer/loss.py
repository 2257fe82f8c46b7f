"""Compressed spectral MSE on a reconstruction-domain STFT.

The loss STFT (20 ms window, 10 ms shift, 320-point FFT) is independent of
the enhancement framing because the loss applies to the synthesized time
signals. With magnitude compression c and blend alpha:

    L = [ alpha * sum |comp(S) - comp(S_hat)|^2
        + (1-alpha) * sum (|S|^c - |S_hat|^c)^2 ] / n_frames

where comp(X) = |X|^c * exp(j arg X).
"""

from __future__ import annotations

import torch

from .config import LossConfig

_EPS = 1e-12


def _loss_stft(x: torch.Tensor, cfg: LossConfig) -> torch.Tensor:
    window = torch.hann_window(cfg.stft_win, periodic=True, dtype=x.dtype)
    return torch.stft(x, n_fft=cfg.stft_nfft, hop_length=cfg.stft_hop,
                      win_length=cfg.stft_win, window=window, center=False,
                      return_complex=True)


def cmse_loss(est: torch.Tensor, ref: torch.Tensor,
              cfg: LossConfig = LossConfig()) -> torch.Tensor:
    """est, ref: (channels, n) real tensors of equal length."""
    if est.shape != ref.shape:
        raise ValueError("estimate/reference shape mismatch")
    s_est = _loss_stft(est, cfg)
    s_ref = _loss_stft(ref, cfg)
    n_frames = s_est.shape[-1]

    mag_est = torch.abs(s_est)
    mag_ref = torch.abs(s_ref)
    c = cfg.compression
    comp_est = (mag_est + _EPS) ** c
    comp_ref = (mag_ref + _EPS) ** c
    # compressed complex spectra: |S|^c * S / |S|
    cplx_est = s_est * (comp_est / (mag_est + _EPS))
    cplx_ref = s_ref * (comp_ref / (mag_ref + _EPS))

    complex_term = torch.sum(torch.abs(cplx_ref - cplx_est) ** 2)
    mag_term = torch.sum((comp_ref - comp_est) ** 2)
    return (cfg.alpha * complex_term + (1.0 - cfg.alpha) * mag_term) / n_frames
