#include "alpine/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alpine {

std::string_view
mappingName(Mapping m)
{
    return m == Mapping::Analog ? "analog" : "digital";
}

Mapping
mappingFromName(std::string_view name)
{
    if (name == "analog")
        return Mapping::Analog;
    if (name == "digital")
        return Mapping::Digital;
    throw ModelError("unknown mapping '" + std::string(name) +
                     "' (expected analog or digital)");
}

// ---------------------------------------------------------------- specs

void
MlpSpec::validate() const
{
    if (n < 4 || n % 4 != 0)
        throw ModelError("MLP width must be a positive multiple of 4");
    if (case_id < 1 || case_id > 4)
        throw ModelError("MLP case must be 1..4, got " +
                         std::to_string(case_id));
    if (n_inferences < 1)
        throw ModelError("inference count must be positive");
}

void
LstmSpec::validate() const
{
    if (x < 1 || y < 1 || n_h < 4)
        throw ModelError("LSTM sizes must be positive with n_h >= 4");
    if (case_id < 1 || case_id > 4)
        throw ModelError("LSTM case must be 1..4, got " +
                         std::to_string(case_id));
    if (n_inferences < 1)
        throw ModelError("inference count must be positive");
}

CnnSpec
CnnSpec::variantF()
{
    CnnSpec s;
    s.variant = "F";
    s.conv = {{64, 11, 4, 0, 2, true},
              {256, 5, 1, 1, 2, true},
              {256, 3, 1, 1, 1, false},
              {256, 3, 1, 1, 1, false},
              {256, 3, 1, 1, 2, false}};
    s.dense = {4096, 4096, 1000};
    return s;
}

CnnSpec
CnnSpec::variantM()
{
    CnnSpec s;
    s.variant = "M";
    s.conv = {{96, 7, 2, 0, 2, true},
              {256, 5, 1, 1, 2, true},
              {512, 3, 1, 1, 1, false},
              {512, 3, 1, 1, 1, false},
              {512, 3, 1, 1, 2, false}};
    s.dense = {4096, 4096, 1000};
    return s;
}

CnnSpec
CnnSpec::variantS()
{
    CnnSpec s;
    s.variant = "S";
    s.conv = {{96, 7, 2, 0, 3, true},
              {256, 5, 1, 1, 2, false},
              {512, 3, 1, 1, 1, false},
              {512, 3, 1, 1, 1, false},
              {512, 3, 1, 1, 3, false}};
    s.dense = {4096, 4096, 1000};
    return s;
}

CnnSpec
CnnSpec::fromVariant(std::string_view v)
{
    if (v == "F" || v == "f")
        return variantF();
    if (v == "M" || v == "m")
        return variantM();
    if (v == "S" || v == "s")
        return variantS();
    throw ModelError("unknown CNN variant '" + std::string(v) +
                     "' (expected F, M or S)");
}

std::vector<ConvGeometry>
cnnGeometry(const CnnSpec &s)
{
    std::vector<ConvGeometry> g;
    int h = s.in_h, w = s.in_w, c = s.in_c;
    for (std::size_t i = 0; i < s.conv.size(); ++i) {
        const auto &l = s.conv[i];
        if (l.kernels < 1 || l.k < 1 || l.stride < 1 || l.pad < 0 || l.pool < 1)
            throw ModelError("conv" + std::to_string(i + 1) +
                             " has non-positive parameters");
        const int oh = (h + 2 * l.pad - l.k) / l.stride + 1;
        const int ow = (w + 2 * l.pad - l.k) / l.stride + 1;
        if (h + 2 * l.pad < l.k || w + 2 * l.pad < l.k || oh / l.pool < 1 ||
            ow / l.pool < 1)
            throw ModelError("conv" + std::to_string(i + 1) +
                             " does not fit its input");
        g.push_back({h, w, c, oh, ow, oh / l.pool, ow / l.pool,
                     l.k * l.k * c, l.kernels});
        h = oh / l.pool;
        w = ow / l.pool;
        c = l.kernels;
    }
    return g;
}

int
cnnFlattenSize(const CnnSpec &s)
{
    const auto g = cnnGeometry(s);
    if (g.empty())
        return s.in_h * s.in_w * s.in_c;
    return g.back().pool_h * g.back().pool_w * g.back().cols;
}

void
CnnSpec::validate() const
{
    if (in_h < 1 || in_w < 1 || in_c < 1)
        throw ModelError("CNN input dimensions must be positive");
    if (conv.empty())
        throw ModelError("CNN needs at least one conv layer");
    if (conv.size() > 5)
        throw ModelError("CNN pipelines map at most five conv layers");
    if (dense.empty())
        throw ModelError("CNN needs at least one dense layer");
    for (int d : dense)
        if (d < 1)
            throw ModelError("dense widths must be positive");
    if (n_inferences < 1)
        throw ModelError("inference count must be positive");
    cnnGeometry(*this);
}

TileDims
lstmTableDims(int n_h, int case_id, int x, int y)
{
    if (case_id < 1 || case_id > 4)
        throw ModelError("LSTM case must be 1..4");
    // The tabulated sizes follow these rules exactly for x = y = 50.
    switch (case_id) {
    case 1:
        return {2 * n_h + x + y, 4 * n_h + y};
    case 2:
        return {n_h + x + y, 4 * n_h + y};
    case 3:
        return {n_h + x + y, 4 * n_h};
    default:
        return {n_h + x + y, n_h};
    }
}

std::vector<int>
lstmCase4Units(int n_h)
{
    std::vector<int> u(4, n_h / 4);
    for (int k = 0; k < n_h % 4; ++k)
        ++u[k];
    return u;
}

// ---------------------------------------------------------------- analytics

WorkingSet
workingSet(const MlpSpec &s)
{
    const std::int64_t n = s.n;
    return {2 * n * n + 3 * n, 3 * n};
}

WorkingSet
workingSet(const LstmSpec &s)
{
    const std::int64_t x = s.x, y = s.y, h = s.n_h;
    const std::int64_t analog = (x + h) + h + y;
    return {analog + 4 * (h * h + h * x) + h * y, analog};
}

OpCount
complexityModel(const MlpSpec &s, Mapping m)
{
    OpCount c;
    c.n = s.n;
    c.n_inferences = s.n_inferences;
    if (m == Mapping::Digital) {
        c.quadratic = 2;
        c.linear = 4;
    } else {
        c.constant = 2;
        c.linear = 6;
    }
    return c;
}

OpCount
complexityModel(const LstmSpec &s, Mapping m)
{
    OpCount c;
    c.n = s.n_h;
    c.n_inferences = s.n_inferences;
    if (m == Mapping::Digital) {
        c.quadratic = 5;
        c.linear = 13;
    } else {
        c.constant = 2;
        c.linear = 15;
    }
    return c;
}

// ---------------------------------------------------------------- golden

std::vector<Q8>
reluRequant(std::span<const Q8> y, ScaleFactor in, ScaleFactor out)
{
    std::vector<Q8> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const float a = static_cast<float>(dequantize(y[i], in));
        r[i] = quantize(a > 0.0f ? a : 0.0f, out);
    }
    return r;
}

float
sigmoidF(float z)
{
    return 1.0f / (1.0f + std::exp(-z));
}

std::vector<float>
softmaxF(std::span<const float> z)
{
    std::vector<float> p(z.size());
    if (z.empty())
        return p;
    const float mx = *std::max_element(z.begin(), z.end());
    float sum = 0.0f;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (auto &v : p)
        v /= sum;
    return p;
}

std::vector<Q8>
digitalMvm(std::span<const Q8> x, std::span<const Q8> w, int rows, int cols,
           int shift)
{
    if (x.size() != static_cast<std::size_t>(rows) ||
        w.size() != static_cast<std::size_t>(rows) * cols)
        throw ShapeError("digital MVM operand shapes disagree");
    std::vector<std::int32_t> acc(cols, 0);
    for (int i = 0; i < rows; ++i) {
        const std::int32_t xi = x[i];
        const Q8 *row = w.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j)
            acc[j] += xi * row[j];
    }
    std::vector<Q8> out(cols);
    for (int j = 0; j < cols; ++j)
        out[j] = saturateAcc(acc[j], shift);
    return out;
}

std::vector<Q8>
tileMvm(AimcTile &tile, std::span<const Q8> x, int row_off, int col_off,
        int count)
{
    for (std::size_t i = 0; i < x.size(); i += kLanesPerWord) {
        const int n = static_cast<int>(
            std::min<std::size_t>(kLanesPerWord, x.size() - i));
        if (tile.cmQueue(packPartial(x.subspan(i, n)), n,
                         row_off + static_cast<int>(i)) != kStatusOk)
            throw ShapeError("queue outside the tile input memory");
    }
    tile.cmProcess();
    std::vector<Q8> out;
    out.reserve(count);
    for (int j = 0; j < count; j += kLanesPerWord) {
        const int n = std::min(kLanesPerWord, count - j);
        const auto d = tile.cmDequeue(n, col_off + j);
        if (d.status != kStatusOk)
            throw ShapeError("dequeue outside the tile output memory");
        const auto lanes = unpack4(d.word);
        out.insert(out.end(), lanes.begin(), lanes.begin() + n);
    }
    return out;
}

std::vector<Q8>
randomQ8(std::size_t n, int bound, std::mt19937_64 &rng)
{
    std::uniform_int_distribution<int> d(-bound, std::min(bound, 127));
    std::vector<Q8> v(n);
    for (auto &q : v)
        q = static_cast<Q8>(d(rng));
    return v;
}

namespace {

/// Shift that keeps a rows-long product of random operands near the middle
/// of the 8-bit range.
int
balancedShift(int rows)
{
    return (defaultOutShift(rows) + 1) / 2 + 2;
}

/// Copies columns [c0, c0 + nc) of a rows x cols matrix.
std::vector<Q8>
columns(std::span<const Q8> w, int rows, int cols, int c0, int nc)
{
    std::vector<Q8> out(static_cast<std::size_t>(rows) * nc);
    for (int r = 0; r < rows; ++r)
        std::copy_n(w.begin() + static_cast<std::size_t>(r) * cols + c0, nc,
                    out.begin() + static_cast<std::size_t>(r) * nc);
    return out;
}

AimcTile
makeTile(int rows, int cols, int shift)
{
    return AimcTile(Crossbar(rows, cols, shift));
}

std::vector<Q8>
concat(std::span<const Q8> a, std::span<const Q8> b)
{
    std::vector<Q8> v(a.begin(), a.end());
    v.insert(v.end(), b.begin(), b.end());
    return v;
}

} // namespace

MlpModel
MlpModel::random(int n, std::uint64_t seed, int weight_bound)
{
    std::mt19937_64 rng(seed);
    MlpModel m;
    m.n = n;
    m.w1 = randomQ8(static_cast<std::size_t>(n) * n, weight_bound, rng);
    m.w2 = randomQ8(static_cast<std::size_t>(n) * n, weight_bound, rng);
    m.shift = balancedShift(n);
    m.adc_scale = 4.0;
    m.act_scale = 4.0;
    return m;
}

std::vector<Q8>
MlpModel::forward(std::span<const Q8> x, Mapping m, int case_id) const
{
    if (x.size() != static_cast<std::size_t>(n))
        throw ShapeError("MLP input has the wrong length");
    const ScaleFactor in(adc_scale), out(act_scale);
    if (m == Mapping::Digital) {
        const auto h = reluRequant(digitalMvm(x, w1, n, n, shift), in, out);
        return reluRequant(digitalMvm(h, w2, n, n, shift), in, out);
    }
    switch (case_id) {
    case 1: {
        auto tile = makeTile(2 * n, 2 * n, shift);
        tile.crossbar().programTile(0, 0, n, n, w1);
        tile.crossbar().programTile(n, n, n, n, w2);
        const auto h = reluRequant(tileMvm(tile, x, 0, 0, n), in, out);
        return reluRequant(tileMvm(tile, h, n, n, n), in, out);
    }
    case 2: {
        auto tile = makeTile(n, 2 * n, shift);
        tile.crossbar().programTile(0, 0, n, n, w1);
        tile.crossbar().programTile(0, n, n, n, w2);
        const auto h = reluRequant(tileMvm(tile, x, 0, 0, n), in, out);
        return reluRequant(tileMvm(tile, h, 0, n, n), in, out);
    }
    case 3: {
        auto t1 = makeTile(n, n, shift);
        auto t2 = makeTile(n, n, shift);
        t1.crossbar().programTile(0, 0, n, n, w1);
        t2.crossbar().programTile(0, 0, n, n, w2);
        const auto h = reluRequant(tileMvm(t1, x, 0, 0, n), in, out);
        return reluRequant(tileMvm(t2, h, 0, 0, n), in, out);
    }
    case 4: {
        const int half = n / 2;
        auto layer = [&](std::span<const Q8> w, std::span<const Q8> v) {
            std::vector<Q8> y;
            for (int part = 0; part < 2; ++part) {
                auto t = makeTile(n, half, shift);
                t.crossbar().programTile(0, 0, n, half,
                                         columns(w, n, n, part * half, half));
                const auto r = reluRequant(tileMvm(t, v, 0, 0, half), in, out);
                y.insert(y.end(), r.begin(), r.end());
            }
            return y;
        };
        const auto h = layer(w1, x);
        return layer(w2, h);
    }
    default:
        throw ModelError("MLP case must be 1..4");
    }
}

// LSTM ------------------------------------------------------------------

LstmModel
LstmModel::random(int x, int y, int n_h, std::uint64_t seed, int weight_bound)
{
    std::mt19937_64 rng(seed);
    LstmModel m;
    m.x = x;
    m.y = y;
    m.n_h = n_h;
    m.w_cell = randomQ8(static_cast<std::size_t>(n_h + x) * 4 * n_h,
                        weight_bound, rng);
    m.w_dense = randomQ8(static_cast<std::size_t>(n_h) * y, weight_bound, rng);
    m.cell_shift = balancedShift(n_h + x);
    // Cases 1 and 2 share one tile, so both blocks use the same shift.
    m.dense_shift = m.cell_shift;
    return m;
}

LstmState
LstmModel::zeroState() const
{
    return {std::vector<Q8>(n_h, 0), std::vector<float>(n_h, 0.0f)};
}

namespace {

struct UnitOut {
    Q8 h;
    float c;
};

UnitOut
unitUpdate(const LstmModel &m, Q8 f, Q8 i, Q8 a, Q8 o, float c_prev)
{
    const ScaleFactor gs(m.gate_scale);
    const float fg = sigmoidF(static_cast<float>(dequantize(f, gs)));
    const float ig = sigmoidF(static_cast<float>(dequantize(i, gs)));
    const float ag = std::tanh(static_cast<float>(dequantize(a, gs)));
    const float og = sigmoidF(static_cast<float>(dequantize(o, gs)));
    const float c = fg * c_prev + ig * ag;
    const float h = og * std::tanh(c);
    return {quantize(h, ScaleFactor(m.h_scale)), c};
}

} // namespace

LstmOutput
LstmModel::step(std::span<const Q8> x_t, const LstmState &prev, Mapping m,
                int case_id) const
{
    if (x_t.size() != static_cast<std::size_t>(x) ||
        prev.h.size() != static_cast<std::size_t>(n_h) ||
        prev.c.size() != static_cast<std::size_t>(n_h))
        throw ShapeError("LSTM step operands have the wrong length");
    const int in_rows = n_h + x;
    const auto u = concat(prev.h, x_t);
    LstmOutput out;
    out.state.h.resize(n_h);
    out.state.c.resize(n_h);
    std::vector<Q8> gates; // gate-major [f | i | a | o]
    std::vector<Q8> y_q;

    auto updateAll = [&](const std::vector<Q8> &g) {
        for (int k = 0; k < n_h; ++k) {
            const auto r = unitUpdate(*this, g[k], g[n_h + k], g[2 * n_h + k],
                                      g[3 * n_h + k], prev.c[k]);
            out.state.h[k] = r.h;
            out.state.c[k] = r.c;
        }
    };

    if (m == Mapping::Digital) {
        gates = digitalMvm(u, w_cell, in_rows, 4 * n_h, cell_shift);
        updateAll(gates);
        y_q = digitalMvm(out.state.h, w_dense, n_h, y, dense_shift);
    } else if (case_id == 1) {
        const auto d = lstmTableDims(n_h, 1, x, y);
        auto tile = makeTile(d.rows, d.cols, cell_shift);
        tile.crossbar().programTile(0, 0, in_rows, 4 * n_h, w_cell);
        tile.crossbar().programTile(in_rows, 4 * n_h, n_h, y, w_dense);
        // One shift serves both blocks of a shared tile.
        if (dense_shift != cell_shift)
            throw ModelError("case 1 needs matching cell and dense shifts");
        updateAll(tileMvm(tile, u, 0, 0, 4 * n_h));
        y_q = tileMvm(tile, out.state.h, in_rows, 4 * n_h, y);
    } else if (case_id == 2) {
        const auto d = lstmTableDims(n_h, 2, x, y);
        auto tile = makeTile(d.rows, d.cols, cell_shift);
        if (dense_shift != cell_shift)
            throw ModelError("case 2 needs matching cell and dense shifts");
        tile.crossbar().programTile(0, 0, in_rows, 4 * n_h, w_cell);
        tile.crossbar().programTile(0, 4 * n_h, n_h, y, w_dense);
        updateAll(tileMvm(tile, u, 0, 0, 4 * n_h));
        y_q = tileMvm(tile, out.state.h, 0, 4 * n_h, y);
    } else if (case_id == 3 || case_id == 4) {
        const auto d = lstmTableDims(n_h, case_id, x, y);
        if (case_id == 3) {
            auto cell = makeTile(d.rows, d.cols, cell_shift);
            cell.crossbar().programTile(0, 0, in_rows, 4 * n_h, w_cell);
            updateAll(tileMvm(cell, u, 0, 0, 4 * n_h));
        } else {
            const auto units = lstmCase4Units(n_h);
            int u0 = 0;
            for (int core = 0; core < 4; ++core) {
                const int nu = units[core];
                auto cell =
                    makeTile(d.rows, std::max(d.cols, 4 * nu), cell_shift);
                // Unit j of this core owns columns 4j..4j+3 (f, i, a, o).
                std::vector<Q8> sliced(static_cast<std::size_t>(in_rows) * 4 *
                                       nu);
                for (int r = 0; r < in_rows; ++r)
                    for (int j = 0; j < nu; ++j)
                        for (int g = 0; g < 4; ++g)
                            sliced[static_cast<std::size_t>(r) * 4 * nu +
                                   4 * j + g] =
                                w_cell[static_cast<std::size_t>(r) * 4 * n_h +
                                       g * n_h + u0 + j];
                cell.crossbar().programTile(0, 0, in_rows, 4 * nu, sliced);
                const auto g = tileMvm(cell, u, 0, 0, 4 * nu);
                for (int j = 0; j < nu; ++j) {
                    const auto r = unitUpdate(*this, g[4 * j], g[4 * j + 1],
                                              g[4 * j + 2], g[4 * j + 3],
                                              prev.c[u0 + j]);
                    out.state.h[u0 + j] = r.h;
                    out.state.c[u0 + j] = r.c;
                }
                u0 += nu;
            }
        }
        auto dense = makeTile(d.rows, y, dense_shift);
        dense.crossbar().programTile(0, 0, n_h, y, w_dense);
        y_q = tileMvm(dense, out.state.h, 0, 0, y);
    } else {
        throw ModelError("LSTM case must be 1..4");
    }
    std::vector<float> z(y);
    for (int j = 0; j < y; ++j)
        z[j] = static_cast<float>(dequantize(y_q[j], ScaleFactor(out_scale)));
    out.probs = softmaxF(z);
    return out;
}

// CNN -------------------------------------------------------------------

CnnModel
CnnModel::random(const CnnSpec &spec, std::uint64_t seed, int weight_bound)
{
    spec.validate();
    std::mt19937_64 rng(seed);
    CnnModel m;
    m.spec = spec;
    for (const auto &g : cnnGeometry(spec)) {
        m.conv_w.push_back(randomQ8(static_cast<std::size_t>(g.rows) * g.cols,
                                    weight_bound, rng));
        m.conv_shift.push_back(balancedShift(g.rows));
    }
    int in = cnnFlattenSize(spec);
    for (int out : spec.dense) {
        m.dense_w.push_back(
            randomQ8(static_cast<std::size_t>(in) * out, weight_bound, rng));
        m.dense_shift.push_back(balancedShift(in));
        in = out;
    }
    return m;
}

namespace {

std::vector<Q8>
maxPool(std::span<const Q8> in, int h, int w, int c, int p)
{
    const int oh = h / p, ow = w / p;
    std::vector<Q8> out(static_cast<std::size_t>(oh) * ow * c);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int ch = 0; ch < c; ++ch) {
                Q8 mx = kQ8Min;
                for (int dy = 0; dy < p; ++dy)
                    for (int dx = 0; dx < p; ++dx)
                        mx = std::max(
                            mx, in[(static_cast<std::size_t>(y * p + dy) * w +
                                    x * p + dx) *
                                       c +
                                   ch]);
                out[(static_cast<std::size_t>(y) * ow + x) * c + ch] = mx;
            }
    return out;
}

std::vector<Q8>
lrn(std::span<const Q8> in, int pixels, int c, ScaleFactor s,
    const LrnParams &p = {})
{
    std::vector<Q8> out(in.size());
    for (int px = 0; px < pixels; ++px) {
        const Q8 *v = in.data() + static_cast<std::size_t>(px) * c;
        for (int ch = 0; ch < c; ++ch) {
            float sum = 0.0f;
            const int lo = std::max(0, ch - p.n / 2);
            const int hi = std::min(c - 1, ch + p.n / 2);
            for (int k = lo; k <= hi; ++k) {
                const float a = static_cast<float>(dequantize(v[k], s));
                sum += a * a;
            }
            const float a = static_cast<float>(dequantize(v[ch], s));
            const float b = a / std::pow(static_cast<float>(p.k) +
                                             static_cast<float>(p.alpha) * sum,
                                         static_cast<float>(p.beta));
            out[static_cast<std::size_t>(px) * c + ch] = quantize(b, s);
        }
    }
    return out;
}

} // namespace

std::vector<float>
CnnModel::forward(std::span<const Q8> image, Mapping m) const
{
    if (image.size() !=
        static_cast<std::size_t>(spec.in_h) * spec.in_w * spec.in_c)
        throw ShapeError("CNN input has the wrong size");
    const ScaleFactor adc(adc_scale), act(act_scale);
    const auto geo = cnnGeometry(spec);
    std::vector<Q8> fm(image.begin(), image.end());
    for (std::size_t l = 0; l < geo.size(); ++l) {
        const auto &g = geo[l];
        const auto &layer = spec.conv[l];
        std::optional<AimcTile> tile;
        if (m == Mapping::Analog) {
            tile.emplace(makeTile(g.rows, g.cols, conv_shift[l]));
            tile->crossbar().programTile(0, 0, g.rows, g.cols, conv_w[l]);
        }
        std::vector<Q8> out(static_cast<std::size_t>(g.out_h) * g.out_w *
                            g.cols);
        std::vector<Q8> col(g.rows);
        for (int oy = 0; oy < g.out_h; ++oy)
            for (int ox = 0; ox < g.out_w; ++ox) {
                int r = 0;
                for (int ky = 0; ky < layer.k; ++ky)
                    for (int kx = 0; kx < layer.k; ++kx) {
                        const int iy = oy * layer.stride - layer.pad + ky;
                        const int ix = ox * layer.stride - layer.pad + kx;
                        const bool inside =
                            iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w;
                        for (int c = 0; c < g.in_c; ++c)
                            col[r++] =
                                inside
                                    ? fm[(static_cast<std::size_t>(iy) *
                                              g.in_w +
                                          ix) *
                                             g.in_c +
                                         c]
                                    : Q8{0};
                    }
                const auto y =
                    m == Mapping::Analog
                        ? tileMvm(*tile, col, 0, 0, g.cols)
                        : digitalMvm(col, conv_w[l], g.rows, g.cols,
                                     conv_shift[l]);
                const auto a = reluRequant(y, adc, act);
                std::copy(a.begin(), a.end(),
                          out.begin() + (static_cast<std::size_t>(oy) *
                                             g.out_w +
                                         ox) *
                                            g.cols);
            }
        if (layer.pool > 1)
            out = maxPool(out, g.out_h, g.out_w, g.cols, layer.pool);
        if (layer.lrn)
            out = lrn(out, g.pool_h * g.pool_w, g.cols, act);
        fm = std::move(out);
    }
    int in = static_cast<int>(fm.size());
    for (std::size_t d = 0; d < spec.dense.size(); ++d) {
        const int o = spec.dense[d];
        const auto y = digitalMvm(fm, dense_w[d], in, o, dense_shift[d]);
        if (d + 1 < spec.dense.size()) {
            fm = reluRequant(y, adc, act);
        } else {
            std::vector<float> z(o);
            for (int j = 0; j < o; ++j)
                z[j] = static_cast<float>(dequantize(y[j], adc));
            return softmaxF(z);
        }
        in = o;
    }
    return {};
}

} // namespace alpine
