#ifndef BSQ_BSQ_HPP
#define BSQ_BSQ_HPP

#include "bsq/arithmetic_coder.hpp"
#include "bsq/byte_io.hpp"
#include "bsq/causal_mask.hpp"
#include "bsq/codec.hpp"
#include "bsq/entropy.hpp"
#include "bsq/error.hpp"
#include "bsq/error_bounds.hpp"
#include "bsq/pnm.hpp"
#include "bsq/prob_models.hpp"
#include "bsq/quantizer.hpp"
#include "bsq/rng.hpp"
#include "bsq/ste_grad.hpp"
#include "bsq/toy_autoencoder.hpp"

#endif  // BSQ_BSQ_HPP
