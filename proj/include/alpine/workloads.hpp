// MLP, LSTM and CNN studies: model specifications, untimed golden forward
// passes in analog (through tiles) and digital (plain integer loops) form,
// working-set and complexity formulas, and builders that turn a model/case
// into per-core programs for the timing model.
#pragma once

#include "alpine/machine.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace alpine {

enum class Mapping { Analog, Digital };
std::string_view mappingName(Mapping m);
Mapping mappingFromName(std::string_view name);

class ModelError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------- specs

struct MlpSpec {
    int n = 1024;
    int case_id = 1;
    int n_inferences = 10;
    void validate() const;
};

struct LstmSpec {
    int x = 50;
    int y = 50;
    int n_h = 256;
    int case_id = 1;
    int n_inferences = 10;
    void validate() const;
};

struct ConvLayer {
    int kernels = 0;
    int k = 1;
    int stride = 1;
    int pad = 0;
    int pool = 1; // k x k max pool, stride k; 1 = none
    bool lrn = false;
};

struct CnnSpec {
    std::string variant = "F";
    int in_h = 224;
    int in_w = 224;
    int in_c = 3;
    std::vector<ConvLayer> conv;
    std::vector<int> dense; // output widths, last one feeds softmax
    int n_inferences = 3;

    static CnnSpec variantF();
    static CnnSpec variantM();
    static CnnSpec variantS();
    static CnnSpec fromVariant(std::string_view v);
    void validate() const;
};

struct TileDims {
    int rows = 0;
    int cols = 0;
    bool operator==(const TileDims &) const = default;
};

/// Tile dimensions as tabulated for n_h in {256, 512, 750}; other sizes use
/// the same construction rules.
TileDims lstmTableDims(int n_h, int case_id, int x = 50, int y = 50);

/// Units of the hidden layer handled by each of the four cell cores in
/// LSTM case 4.
std::vector<int> lstmCase4Units(int n_h);

struct ConvGeometry {
    int in_h, in_w, in_c;
    int out_h, out_w;     // before pooling
    int pool_h, pool_w;   // after pooling
    int rows, cols;       // im2col matrix: k*k*in_c x kernels
};
std::vector<ConvGeometry> cnnGeometry(const CnnSpec &s);
/// Flattened input width of the first dense layer.
int cnnFlattenSize(const CnnSpec &s);

// ---------------------------------------------------------------- analytics

struct WorkingSet {
    std::int64_t digital_bytes = 0;
    std::int64_t analog_bytes = 0;
};
WorkingSet workingSet(const MlpSpec &s);
WorkingSet workingSet(const LstmSpec &s);

/// Leading-order operation counts: N_inf * (q * n^2 + l * n + c).
struct OpCount {
    double quadratic = 0; // coefficient of n^2
    double linear = 0;    // coefficient of n
    double constant = 0;
    double n = 0;
    double n_inferences = 0;
    double total() const
    {
        return n_inferences * (quadratic * n * n + linear * n + constant);
    }
};
OpCount complexityModel(const MlpSpec &s, Mapping m);
OpCount complexityModel(const LstmSpec &s, Mapping m);

// ---------------------------------------------------------------- golden

/// fp32 activation stage shared by every mapping: dequantize the 8-bit MVM
/// output, apply ReLU and requantize for the next layer.
std::vector<Q8> reluRequant(std::span<const Q8> y, ScaleFactor in,
                            ScaleFactor out);
float sigmoidF(float z);
std::vector<float> softmaxF(std::span<const float> z);

/// Digital reference for one layer: exact integer products followed by the
/// same output shift the tile applies. w is rows x cols row-major.
std::vector<Q8> digitalMvm(std::span<const Q8> x, std::span<const Q8> w,
                           int rows, int cols, int shift);

/// Drives a tile through CM_QUEUE / CM_PROCESS / CM_DEQUEUE for one vector:
/// queues x at row `row_off`, processes, and dequeues `count` outputs from
/// column `col_off`.
std::vector<Q8> tileMvm(AimcTile &tile, std::span<const Q8> x, int row_off,
                        int col_off, int count);

std::vector<Q8> randomQ8(std::size_t n, int bound, std::mt19937_64 &rng);

struct MlpModel {
    int n = 0;
    std::vector<Q8> w1, w2; // n x n, rows = inputs
    int shift = 0;
    double adc_scale = 1.0; // dequantization of tile outputs
    double act_scale = 1.0; // requantization of activations

    static MlpModel random(int n, std::uint64_t seed, int weight_bound = 8);
    /// Digital reference, or the analog mapping of `case_id`.
    std::vector<Q8> forward(std::span<const Q8> x, Mapping m,
                            int case_id = 1) const;
};

struct LstmState {
    std::vector<Q8> h; // n_h
    std::vector<float> c;
};

struct LstmOutput {
    LstmState state;
    std::vector<float> probs; // y
};

struct LstmModel {
    int x = 0, y = 0, n_h = 0;
    std::vector<Q8> w_cell;  // (n_h + x) x 4 n_h, columns [f | i | a | o]
    std::vector<Q8> w_dense; // n_h x y
    int cell_shift = 0;
    int dense_shift = 0;
    double gate_scale = 16.0;  // int8 gate pre-activation -> real
    double h_scale = 127.0;    // real h in [-1, 1] -> int8
    double out_scale = 16.0;

    static LstmModel random(int x, int y, int n_h, std::uint64_t seed,
                            int weight_bound = 8);
    LstmOutput step(std::span<const Q8> x_t, const LstmState &prev, Mapping m,
                    int case_id = 1) const;
    LstmState zeroState() const;
};

struct CnnModel {
    CnnSpec spec;
    std::vector<std::vector<Q8>> conv_w;  // rows x kernels each
    std::vector<int> conv_shift;
    std::vector<std::vector<Q8>> dense_w; // in x out each
    std::vector<int> dense_shift;
    double adc_scale = 4.0;
    double act_scale = 4.0;

    static CnnModel random(const CnnSpec &spec, std::uint64_t seed,
                           int weight_bound = 4);
    /// Input is in_h x in_w x in_c, HWC order. Returns softmax output.
    std::vector<float> forward(std::span<const Q8> image, Mapping m) const;
};

/// Local response normalisation constants.
struct LrnParams {
    double k = 2.0;
    int n = 5;
    double alpha = 1e-4;
    double beta = 0.75;
};

// ---------------------------------------------------------------- builders

/// Software-side cost of the non-MVM work, in abstract operations. fp32 work
/// is counted in vector operations of `fp32_lanes` elements.
struct SoftwareCosts {
    int fp32_lanes = 4;
    int queue_word_ops = 12;   // gather and pack one input word
    int dequeue_word_ops = 12; // unpack and store one output word
    int relu_ops = 6;          // dequantize, max, scale, round, convert, pack
    int sigmoid_ops = 12;
    int tanh_ops = 12;
    int exp_ops = 10;
    int gate_combine_ops = 10; // c = f c + i a, h = o tanh(c), quantize
    int lrn_ops = 16;
    int im2col_word_ops = 1;   // digital patch gather per 4 bytes
    int softmax_ops = 4;       // on top of exp: max, sum, divide, store

    static SoftwareCosts defaults() { return {}; }
    void validate() const;
};
SoftwareCosts softwareCostsFromJson(const nlohmann::json &config);
nlohmann::json softwareCostsToJson(const SoftwareCosts &c);

Workload buildMlp(const MlpSpec &s, Mapping m, const SystemConfig &cfg,
                  const SoftwareCosts &sw = {});
Workload buildLstm(const LstmSpec &s, Mapping m, const SystemConfig &cfg,
                   const SoftwareCosts &sw = {});
Workload buildCnn(const CnnSpec &s, Mapping m, const SystemConfig &cfg,
                  const SoftwareCosts &sw = {});

using ModelSpec = std::variant<MlpSpec, LstmSpec, CnnSpec>;
Workload build(const ModelSpec &spec, Mapping m, const SystemConfig &cfg,
               const SoftwareCosts &sw = {});

/// {"model": "mlp"|"lstm"|"cnn", ...} with the spec fields as keys; CNN
/// stacks use "input": [h, w, c], "conv": [...], "dense": [...].
ModelSpec modelFromJson(const nlohmann::json &j);
nlohmann::json modelToJson(const ModelSpec &spec);

} // namespace alpine
