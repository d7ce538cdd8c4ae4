// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header.

#pragma once

#include "channel.hpp"
#include "comm_rx.hpp"
#include "config.hpp"
#include "estimation.hpp"
#include "fft.hpp"
#include "harness.hpp"
#include "io.hpp"
#include "precoder.hpp"
#include "rng.hpp"
#include "sparse.hpp"
#include "waveform.hpp"
