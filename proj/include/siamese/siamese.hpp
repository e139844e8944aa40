#pragma once

#include "siamese/accuracy.hpp"
#include "siamese/data.hpp"
#include "siamese/dataset.hpp"
#include "siamese/errors.hpp"
#include "siamese/eval.hpp"
#include "siamese/gradcheck.hpp"
#include "siamese/losses.hpp"
#include "siamese/model_io.hpp"
#include "siamese/net.hpp"
#include "siamese/pairing.hpp"
#include "siamese/tensor.hpp"
#include "siamese/text_io.hpp"
#include "siamese/train.hpp"
