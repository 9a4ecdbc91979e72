#pragma once

#include "ctscan/error.hpp"

#include <string>
#include <vector>

namespace ctscan::racnet {

/// How the l real slices are laid out across the padded length t.
enum class Routing { FirstL, Aligned };

inline std::string to_string(Routing r) { return r == Routing::FirstL ? "first_l" : "aligned"; }

inline Routing parse_routing(const std::string& text) {
    if (text == "first_l") return Routing::FirstL;
    if (text == "aligned") return Routing::Aligned;
    throw ConfigError("routing must be 'first_l' or 'aligned', got '" + text + "'");
}

struct RACNetConfig {
    int t = 700;  // padded sequence length
    int rnn_units = 128;
    int dense_units = 128;
    double dropout_keep = 0.8;
    int num_classes = 2;
    Routing routing = Routing::Aligned;
    int feature_dim = 32;
    int input_rows = 256;
    int input_cols = 256;
    std::vector<int> conv_channels{8, 16};  // hidden conv blocks; a final block emits feature_dim channels
    int batch_size = 5;
    double learning_rate = 1e-4;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;

    int conv_blocks() const { return int(conv_channels.size()) + 1; }

    void validate() const {
        if (t < 1) throw ConfigError("t must be >= 1");
        if (rnn_units < 1 || dense_units < 1 || feature_dim < 1) throw ConfigError("layer widths must be >= 1");
        if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) throw ConfigError("dropout_keep must lie in (0, 1]");
        if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
        for (int c : conv_channels) {
            if (c < 1) throw ConfigError("conv_channels entries must be >= 1");
        }
        const int min_side = 1 << conv_blocks();
        if (input_rows < min_side || input_cols < min_side) {
            throw ConfigError("input size must be at least " + std::to_string(min_side) + " per side for " +
                              std::to_string(conv_blocks()) + " pooling blocks");
        }
    }
};

}  // namespace ctscan::racnet
