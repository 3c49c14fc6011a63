#pragma once

#include <cstdint>
#include <string>

#include "duodet/augment/config.hpp"
#include "duodet/model/config.hpp"

namespace duodet {

inline ModelConfig unresolved_classes()
{
    ModelConfig m;
    m.num_classes = 0;
    return m;
}

/// Everything a training run needs. `model.num_classes == 0` means "take it
/// from the manifest".
struct TrainConfig {
    std::string manifest;
    int epochs = 100;
    int batch_size = 8;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    int input_size = 128;
    int max_steps = 0;           // 0: run all epochs
    std::string checkpoint_dir = "runs";
    AugmentConfig aug;
    ModelConfig model = unresolved_classes();

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate(const TrainConfig& c)
{
    auto fail = [](const std::string& field, const std::string& what) { throw ValidationError(field + " " + what); };
    if (c.epochs <= 0) {
        fail("epochs", "must be positive");
    }
    if (c.batch_size <= 0) {
        fail("batch_size", "must be positive");
    }
    if (!(c.learning_rate > 0)) {
        fail("learning_rate", "must be positive");
    }
    if (!(c.momentum >= 0 && c.momentum < 1)) {
        fail("momentum", "must be in [0,1)");
    }
    if (!(c.weight_decay >= 0)) {
        fail("weight_decay", "must be >= 0");
    }
    if (c.input_size <= 0 || c.input_size % 32 != 0) {
        fail("input_size", "must be a positive multiple of 32");
    }
    if (c.max_steps < 0) {
        fail("max_steps", "must be >= 0");
    }
    validate(c.aug);
    if (c.model.num_classes != 0) {
        validate(c.model);
    } else {
        ModelConfig m = c.model;
        m.num_classes = 1;
        validate(m);
    }
}

}   // namespace duodet
