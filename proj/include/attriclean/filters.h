#ifndef ATTRICLEAN_FILTERS_H
#define ATTRICLEAN_FILTERS_H

#include <array>
#include <vector>

#include "attriclean/waveform.h"

namespace attriclean {

// Second-order IIR section, coefficients normalized so a0 == 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

std::vector<double> biquad_cascade(const std::vector<Biquad>& sections,
                                   const std::vector<double>& x);

// RBJ cookbook designs (used by the synthesizer).
Biquad rbj_lowpass(double fc, double q, double fs);
Biquad rbj_bandpass(double fc, double q, double fs);  // 0 dB peak gain

// 4th-order Chebyshev type II lowpass as two biquad sections. fc is the
// stopband edge: |H(f)| <= -stopband_db for all f >= fc. Analog prototype,
// frequency prewarp, bilinear transform.
std::array<Biquad, 2> design_cheby2_lowpass4(double fc, double stopband_db,
                                             double fs);

struct ReverbParams {
  double room = 0.8;     // comb feedback
  double damping = 0.8;  // one-pole lowpass inside the feedback loop
  double wet = 0.5;
  double dry = 0.4;
  double tail_s = 0.5;   // appended decay time
};

// Parallel damped feedback combs + one series allpass, freeverb style.
// Output is input length + tail.
Waveform reverb(const Waveform& x, const ReverbParams& p);

}  // namespace attriclean

#endif  // ATTRICLEAN_FILTERS_H
