#pragma once

#include "noisectx/config.hpp"

namespace noisectx::cli {

/// Rejects keys no command understands.
void check_known_keys(const KeyValueConfig& cfg);

int cmd_gen_data(const KeyValueConfig& cfg);
int cmd_train(const KeyValueConfig& cfg);
int cmd_enhance(const KeyValueConfig& cfg);
int cmd_eval(const KeyValueConfig& cfg);
int cmd_grad_check(const KeyValueConfig& cfg);
int cmd_param_count(const KeyValueConfig& cfg);

}  // namespace noisectx::cli
