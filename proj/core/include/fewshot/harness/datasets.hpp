#pragma once

#include <string>
#include <string_view>

#include "fewshot/common/image_shape.hpp"
#include "fewshot/data/dataset.hpp"
#include "fewshot/data/synthetic.hpp"

namespace fewshot {

/// Dataset references:
///   synth:key=value,...   inline synthetic domain; keys seed, classes, items,
///                         shape, shift, magnitude, shift_seed, distinct, name
///   manifest:<path>       synthetic manifest file written by make-synth
///   folder:<path>         one sub-directory of images per class
/// A bare path is a manifest when it ends in ".json", otherwise a folder.
/// Synthetic shapes default to `shape`; folder images are resized to it.
LabeledDataset resolve_dataset(std::string_view ref, const ImageShape& shape);

/// The synthetic spec of an inline `synth:` reference.
SyntheticSpec parse_synth_ref(std::string_view body, const ImageShape& shape);

}  // namespace fewshot
