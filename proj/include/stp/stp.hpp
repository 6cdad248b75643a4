#ifndef STP_STP_HPP
#define STP_STP_HPP

#include "stp/core.hpp"
#include "stp/symbolic.hpp"
#include "stp/metric.hpp"
#include "stp/loss.hpp"
#include "stp/retrieval.hpp"
#include "stp/io.hpp"
#include "stp/synth.hpp"
#include "stp/pipeline.hpp"

#endif  // STP_STP_HPP
