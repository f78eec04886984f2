#ifndef ATTRICLEAN_SERIAL_REF_H
#define ATTRICLEAN_SERIAL_REF_H

#include <span>
#include <vector>

#include "attriclean/attribution.h"
#include "attriclean/fad.h"
#include "attriclean/sepmodel.h"

// Plain single-threaded reference implementations of the OpenMP kernels.
// They exist so tests can pin the parallel kernels bit-for-bit and so the
// benchmark target has a baseline to compare against. Keep them boring.
namespace attriclean::serial {

Spectrogram stft_magnitude(const Waveform& w, int window, int hop);

EmbeddingSequence log_mel_embed(const Spectrogram& s, const MelFilterbank& fb);

double batch_gradient(const ModelParams& p, const FramePool& pool,
                      std::span<const std::size_t> rows,
                      std::vector<double>& grad);

std::vector<double> corpus_losses(const ModelParams& p, const FramePool& pool);

FisherDiagonal fisher_diagonal(const ModelParams& p, const FramePool& pool,
                               const FisherOptions& opt = {});

std::vector<FadScore> per_song_fad_scores(const std::vector<StemSet>& corpus,
                                          const GaussianStats& ref,
                                          const EmbedConfig& cfg);

}  // namespace attriclean::serial

#endif  // ATTRICLEAN_SERIAL_REF_H
