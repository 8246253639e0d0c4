#include "alpine/workloads.hpp"

#include <algorithm>
#include <initializer_list>
#include <string_view>

namespace alpine {

using nlohmann::json;

void
SoftwareCosts::validate() const
{
    for (int v : {fp32_lanes, queue_word_ops, dequeue_word_ops, relu_ops,
                  sigmoid_ops, tanh_ops, exp_ops, gate_combine_ops, lrn_ops,
                  im2col_word_ops, softmax_ops})
        if (v < 0)
            throw ConfigError("software costs must be non-negative");
    if (fp32_lanes < 1)
        throw ConfigError("fp32_lanes must be positive");
}

SoftwareCosts
softwareCostsFromJson(const json &config)
{
    SoftwareCosts c;
    if (!config.is_object() || !config.contains("software"))
        return c;
    const auto &j = config.at("software");
    auto rd = [&](const char *key, int &out) {
        if (j.contains(key))
            out = j.at(key).get<int>();
    };
    rd("fp32_lanes", c.fp32_lanes);
    rd("queue_word_ops", c.queue_word_ops);
    rd("dequeue_word_ops", c.dequeue_word_ops);
    rd("relu_ops", c.relu_ops);
    rd("sigmoid_ops", c.sigmoid_ops);
    rd("tanh_ops", c.tanh_ops);
    rd("exp_ops", c.exp_ops);
    rd("gate_combine_ops", c.gate_combine_ops);
    rd("lrn_ops", c.lrn_ops);
    rd("im2col_word_ops", c.im2col_word_ops);
    rd("softmax_ops", c.softmax_ops);
    c.validate();
    return c;
}

json
softwareCostsToJson(const SoftwareCosts &c)
{
    return json{{"fp32_lanes", c.fp32_lanes},
                {"queue_word_ops", c.queue_word_ops},
                {"dequeue_word_ops", c.dequeue_word_ops},
                {"relu_ops", c.relu_ops},
                {"sigmoid_ops", c.sigmoid_ops},
                {"tanh_ops", c.tanh_ops},
                {"exp_ops", c.exp_ops},
                {"gate_combine_ops", c.gate_combine_ops},
                {"lrn_ops", c.lrn_ops},
                {"im2col_word_ops", c.im2col_word_ops},
                {"softmax_ops", c.softmax_ops}};
}

namespace {

std::int64_t
words(std::int64_t bytes)
{
    return (bytes + kLanesPerWord - 1) / kLanesPerWord;
}

/// Emits the recurring step patterns shared by all builders.
class Emitter {
  public:
    Emitter(const SoftwareCosts &sw) : sw_(sw) {}

    std::int64_t vec(std::int64_t elements) const
    {
        return (elements + sw_.fp32_lanes - 1) / sw_.fp32_lanes;
    }

    void queue(CoreProgram &p, int index, int count, int slot = 0) const
    {
        p.compute(SubRoi::AnalogQueue, 0, 0, words(count) * sw_.queue_word_ops);
        p.queueVector(SubRoi::AnalogQueue, index, count, {}, slot);
    }

    void process(CoreProgram &p, int slot = 0) const
    {
        auto i = CmInstruction::process();
        i.rn = static_cast<std::uint32_t>(slot) << 24;
        p.cm(SubRoi::AnalogMvm, i);
    }

    void dequeue(CoreProgram &p, int index, int count, int slot = 0) const
    {
        p.dequeueVector(SubRoi::AnalogDequeue, index, count, slot);
        p.compute(SubRoi::AnalogDequeue, 0, 0,
                  words(count) * sw_.dequeue_word_ops);
    }

    /// Streams a rows x cols int8 weight block and multiplies it.
    void digitalMvm(CoreProgram &p, int region, std::int64_t offset,
                    std::int64_t rows, std::int64_t cols) const
    {
        p.read(SubRoi::DigitalMvm, region, offset, rows * cols);
        p.compute(SubRoi::DigitalMvm, 2 * rows * cols);
    }

    void relu(CoreProgram &p, std::int64_t elements) const
    {
        p.compute(SubRoi::DigitalActivation, 0, vec(elements) * sw_.relu_ops);
    }

    void softmax(CoreProgram &p, std::int64_t elements) const
    {
        p.compute(SubRoi::DigitalActivation, 0,
                  vec(elements) * (1 + sw_.exp_ops + sw_.softmax_ops));
    }

    /// Dequantization plus f, i, o sigmoids and the candidate tanh.
    void gateActivation(CoreProgram &p, std::int64_t units) const
    {
        p.compute(SubRoi::DigitalActivation, 0,
                  vec(4 * units) +
                      vec(units) * (3 * sw_.sigmoid_ops + sw_.tanh_ops));
    }

    void gateCombination(CoreProgram &p, std::int64_t units) const
    {
        p.compute(SubRoi::GateCombination, 0,
                  vec(units) * (sw_.gate_combine_ops + sw_.tanh_ops));
    }

    const SoftwareCosts &sw() const { return sw_; }

  private:
    const SoftwareCosts &sw_;
};

void
bindTile(Workload &w, int core, int rows, int cols, const SystemConfig &cfg)
{
    AimcTile t(rows, cols, cfg.tile);
    t.setFunctional(false);
    w.tiles.bind(core, w.tiles.addTile(std::move(t)));
}

void
checkCores(const Workload &w, const SystemConfig &cfg)
{
    if (w.programs.size() > static_cast<std::size_t>(cfg.n_cores))
        throw ModelError(w.name + " needs " +
                         std::to_string(w.programs.size()) +
                         " cores, the system has " +
                         std::to_string(cfg.n_cores));
}

} // namespace

// ---------------------------------------------------------------- MLP

Workload
buildMlp(const MlpSpec &s, Mapping m, const SystemConfig &cfg,
         const SoftwareCosts &sw)
{
    s.validate();
    sw.validate();
    const Emitter e(sw);
    const int n = s.n;
    const int N = s.n_inferences;
    const bool analog = m == Mapping::Analog;
    Workload w;
    w.name = "mlp_case" + std::to_string(s.case_id) + "_" +
             std::string(mappingName(m)) + "_n" + std::to_string(n);
    const int input = w.addRegion("input", static_cast<std::int64_t>(N) * n);
    const int output = w.addRegion("output", static_cast<std::int64_t>(N) * n);
    int w1 = -1, w2 = -1;
    if (!analog) {
        w1 = w.addRegion("w1", static_cast<std::int64_t>(n) * n);
        w2 = w.addRegion("w2", static_cast<std::int64_t>(n) * n);
    }
    const std::int64_t nn = n;

    if (s.case_id == 1 || s.case_id == 2) {
        w.programs.resize(1);
        auto &p = w.programs[0];
        const int scratch = w.addRegion("scratch", 2 * nn);
        if (!analog) {
            for (int i = 0; i < N; ++i) {
                p.read(SubRoi::InputLoad, input, i * nn, n);
                e.digitalMvm(p, w1, 0, n, n);
                e.relu(p, n);
                p.write(SubRoi::DigitalActivation, scratch, 0, n);
                p.read(SubRoi::DigitalMvm, scratch, 0, n);
                e.digitalMvm(p, w2, 0, n, n);
                e.relu(p, n);
                p.write(SubRoi::OutputWriteback, output, i * nn, n);
            }
        } else if (s.case_id == 1) {
            // Both layers sit on the diagonal of one tile; each process
            // computes layer 1 of inference i and layer 2 of inference i-1.
            bindTile(w, 0, 2 * n, 2 * n, cfg);
            for (int i = 0; i <= N; ++i) {
                if (i < N) {
                    p.read(SubRoi::InputLoad, input, i * nn, n);
                    e.queue(p, 0, n);
                }
                if (i > 0) {
                    p.read(SubRoi::AnalogQueue, scratch, 0, n);
                    e.queue(p, n, n);
                }
                e.process(p);
                if (i < N) {
                    e.dequeue(p, 0, n);
                    e.relu(p, n);
                    p.write(SubRoi::DigitalActivation, scratch, 0, n);
                }
                if (i > 0) {
                    e.dequeue(p, n, n);
                    e.relu(p, n);
                    p.write(SubRoi::OutputWriteback, output, (i - 1) * nn, n);
                }
            }
        } else {
            bindTile(w, 0, n, 2 * n, cfg);
            for (int i = 0; i < N; ++i) {
                p.read(SubRoi::InputLoad, input, i * nn, n);
                e.queue(p, 0, n);
                e.process(p);
                e.dequeue(p, 0, n);
                e.relu(p, n);
                p.write(SubRoi::DigitalActivation, scratch, 0, n);
                p.read(SubRoi::AnalogQueue, scratch, 0, n);
                e.queue(p, 0, n);
                e.process(p);
                e.dequeue(p, n, n);
                e.relu(p, n);
                p.write(SubRoi::OutputWriteback, output, i * nn, n);
            }
        }
    } else if (s.case_id == 3) {
        w.programs.resize(2);
        const int act = w.addRegion("act", 2 * nn);
        const int full = w.addChannel("act_full", 0);
        const int free = w.addChannel("act_free", 2);
        if (analog) {
            bindTile(w, 0, n, n, cfg);
            bindTile(w, 1, n, n, cfg);
        }
        auto &p0 = w.programs[0];
        auto &p1 = w.programs[1];
        for (int i = 0; i < N; ++i) {
            const std::int64_t slot = (i % 2) * nn;
            p0.read(SubRoi::InputLoad, input, i * nn, n);
            if (analog) {
                e.queue(p0, 0, n);
                e.process(p0);
                e.dequeue(p0, 0, n);
            } else {
                e.digitalMvm(p0, w1, 0, n, n);
            }
            e.relu(p0, n);
            p0.wait(SubRoi::Sync, free);
            p0.write(SubRoi::DigitalActivation, act, slot, n);
            p0.signal(SubRoi::Sync, {full});

            p1.wait(SubRoi::Sync, full);
            p1.read(SubRoi::InputLoad, act, slot, n);
            if (analog) {
                e.queue(p1, 0, n);
                e.process(p1);
                e.dequeue(p1, 0, n);
            } else {
                e.digitalMvm(p1, w2, 0, n, n);
            }
            e.relu(p1, n);
            p1.write(SubRoi::OutputWriteback, output, i * nn, n);
            p1.signal(SubRoi::Sync, {free});
        }
    } else {
        // Layer 1 on cores 0/1, layer 2 on cores 2/3, each core owning half
        // of its layer's outputs.
        w.programs.resize(4);
        const int half = n / 2;
        const std::int64_t hh = half;
        const int act = w.addRegion("act", 2 * nn);
        const int full[2] = {w.addChannel("act_full_2", 0),
                             w.addChannel("act_full_3", 0)};
        const int free[2] = {w.addChannel("act_free_0", 4),
                             w.addChannel("act_free_1", 4)};
        const int pair[2] = {w.addChannel("pair_0", 0),
                             w.addChannel("pair_1", 0)};
        if (analog)
            for (int c = 0; c < 4; ++c)
                bindTile(w, c, n, half, cfg);
        for (int i = 0; i < N; ++i) {
            const std::int64_t slot = (i % 2) * nn;
            for (int k = 0; k < 2; ++k) {
                auto &p = w.programs[k];
                p.read(SubRoi::InputLoad, input, i * nn, n);
                if (analog) {
                    e.queue(p, 0, n);
                    e.process(p);
                    e.dequeue(p, 0, half);
                } else {
                    e.digitalMvm(p, w1, k * nn * hh, n, half);
                }
                e.relu(p, half);
                p.wait(SubRoi::Sync, free[k], 2);
                p.write(SubRoi::DigitalActivation, act, slot + k * hh, half);
                p.signal(SubRoi::Sync, {pair[1 - k]});
                p.wait(SubRoi::Sync, pair[k]);
                p.signal(SubRoi::Sync, {full[0], full[1]});
            }
            for (int k = 0; k < 2; ++k) {
                auto &p = w.programs[2 + k];
                p.wait(SubRoi::Sync, full[k], 2);
                p.read(SubRoi::InputLoad, act, slot, n);
                if (analog) {
                    e.queue(p, 0, n);
                    e.process(p);
                    e.dequeue(p, 0, half);
                } else {
                    e.digitalMvm(p, w2, k * nn * hh, n, half);
                }
                e.relu(p, half);
                p.write(SubRoi::OutputWriteback, output, i * nn + k * hh, half);
                p.signal(SubRoi::Sync, {free[0], free[1]});
            }
        }
    }
    checkCores(w, cfg);
    return w;
}

// ---------------------------------------------------------------- LSTM

Workload
buildLstm(const LstmSpec &s, Mapping m, const SystemConfig &cfg,
          const SoftwareCosts &sw)
{
    s.validate();
    sw.validate();
    const Emitter e(sw);
    const bool analog = m == Mapping::Analog;
    const int x = s.x, y = s.y, nh = s.n_h, N = s.n_inferences;
    const int in_rows = nh + x;
    Workload w;
    w.name = "lstm_case" + std::to_string(s.case_id) + "_" +
             std::string(mappingName(m)) + "_nh" + std::to_string(nh);
    const int xseq = w.addRegion("x_seq", static_cast<std::int64_t>(N) * x);
    const int output = w.addRegion("output", static_cast<std::int64_t>(N) * y);
    int wcell = -1, wdense = -1;
    if (!analog) {
        wcell = w.addRegion("w_cell", static_cast<std::int64_t>(in_rows) * 4 * nh);
        wdense = w.addRegion("w_dense", static_cast<std::int64_t>(nh) * y);
    }

    // Cell layer for `units` hidden units: reads x_t and h_{t-1}, produces
    // the gate pre-activations, then the element-wise state update.
    auto cellMvm = [&](CoreProgram &p, std::int64_t weight_off, int units,
                       int row_base) {
        if (analog) {
            e.queue(p, row_base, in_rows);
            e.process(p);
            e.dequeue(p, 0, 4 * units);
        } else {
            e.digitalMvm(p, wcell, weight_off, in_rows, 4 * units);
        }
    };
    auto cellUpdate = [&](CoreProgram &p, int cstate, int units) {
        e.gateActivation(p, units);
        p.read(SubRoi::GateCombination, cstate, 0, 4LL * units);
        e.gateCombination(p, units);
        p.write(SubRoi::GateCombination, cstate, 0, 4LL * units);
    };
    auto denseLayer = [&](CoreProgram &p, int t, int row_off, int col_off) {
        if (analog) {
            e.queue(p, row_off, nh);
            e.process(p);
            e.dequeue(p, col_off, y);
        } else {
            e.digitalMvm(p, wdense, 0, nh, y);
        }
        e.softmax(p, y);
        p.write(SubRoi::OutputWriteback, output, static_cast<std::int64_t>(t) * y,
                y);
    };

    if (s.case_id == 1 || s.case_id == 2) {
        w.programs.resize(1);
        auto &p = w.programs[0];
        const int hbuf = w.addRegion("h", nh);
        const int cstate = w.addRegion("c_state", 4LL * nh);
        if (analog && s.case_id == 1) {
            const auto d = lstmTableDims(nh, 1, x, y);
            bindTile(w, 0, d.rows, d.cols, cfg);
            // Cell block at (0, 0), dense block at (in_rows, 4 n_h): one
            // process runs the cell of step t and the dense layer of t-1.
            for (int t = 0; t <= N; ++t) {
                if (t < N) {
                    p.read(SubRoi::InputLoad, xseq, static_cast<std::int64_t>(t) * x, x);
                    p.read(SubRoi::InputLoad, hbuf, 0, nh);
                    e.queue(p, 0, in_rows);
                }
                if (t > 0) {
                    p.read(SubRoi::AnalogQueue, hbuf, 0, nh);
                    e.queue(p, in_rows, nh);
                }
                e.process(p);
                if (t < N) {
                    e.dequeue(p, 0, 4 * nh);
                    cellUpdate(p, cstate, nh);
                    p.write(SubRoi::GateCombination, hbuf, 0, nh);
                }
                if (t > 0) {
                    e.dequeue(p, 4 * nh, y);
                    e.softmax(p, y);
                    p.write(SubRoi::OutputWriteback, output,
                            static_cast<std::int64_t>(t - 1) * y, y);
                }
            }
        } else {
            if (analog) {
                const auto d = lstmTableDims(nh, 2, x, y);
                bindTile(w, 0, d.rows, d.cols, cfg);
            }
            for (int t = 0; t < N; ++t) {
                p.read(SubRoi::InputLoad, xseq, static_cast<std::int64_t>(t) * x, x);
                p.read(SubRoi::InputLoad, hbuf, 0, nh);
                cellMvm(p, 0, nh, 0);
                cellUpdate(p, cstate, nh);
                p.write(SubRoi::GateCombination, hbuf, 0, nh);
                p.read(SubRoi::AnalogQueue, hbuf, 0, nh);
                denseLayer(p, t, 0, 4 * nh);
            }
        }
    } else if (s.case_id == 3) {
        w.programs.resize(2);
        const int hbuf = w.addRegion("h", 2LL * nh);
        const int cstate = w.addRegion("c_state", 4LL * nh);
        const int full = w.addChannel("h_full", 0);
        const int free = w.addChannel("h_free", 2);
        if (analog) {
            const auto d = lstmTableDims(nh, 3, x, y);
            bindTile(w, 0, d.rows, d.cols, cfg);
            bindTile(w, 1, d.rows, y, cfg);
        }
        auto &p0 = w.programs[0];
        auto &p1 = w.programs[1];
        for (int t = 0; t < N; ++t) {
            const std::int64_t cur = (t % 2) * static_cast<std::int64_t>(nh);
            const std::int64_t prev = ((t + 1) % 2) * static_cast<std::int64_t>(nh);
            p0.read(SubRoi::InputLoad, xseq, static_cast<std::int64_t>(t) * x, x);
            p0.read(SubRoi::InputLoad, hbuf, prev, nh);
            cellMvm(p0, 0, nh, 0);
            cellUpdate(p0, cstate, nh);
            p0.wait(SubRoi::Sync, free);
            p0.write(SubRoi::GateCombination, hbuf, cur, nh);
            p0.signal(SubRoi::Sync, {full});

            p1.wait(SubRoi::Sync, full);
            p1.read(SubRoi::InputLoad, hbuf, cur, nh);
            denseLayer(p1, t, 0, 0);
            p1.signal(SubRoi::Sync, {free});
        }
    } else {
        // Four cell cores own consecutive unit ranges with the gates of each
        // unit in four adjacent columns; core 4 runs the dense layer.
        w.programs.resize(5);
        const auto units = lstmCase4Units(nh);
        const int hbuf = w.addRegion("h", 2LL * nh);
        int peer[4], free[4], cstate[4];
        for (int k = 0; k < 4; ++k) {
            peer[k] = w.addChannel("h_peer_" + std::to_string(k), 0);
            free[k] = w.addChannel("h_free_" + std::to_string(k), 2);
            cstate[k] = w.addRegion("c_state_" + std::to_string(k),
                                    4LL * std::max(units[k], 1));
        }
        const int full = w.addChannel("h_full", 0);
        if (analog) {
            const auto d = lstmTableDims(nh, 4, x, y);
            for (int k = 0; k < 4; ++k)
                bindTile(w, k, d.rows, std::max(d.cols, 4 * units[k]), cfg);
            bindTile(w, 4, d.rows, y, cfg);
        }
        for (int t = 0; t < N; ++t) {
            const std::int64_t cur = (t % 2) * static_cast<std::int64_t>(nh);
            const std::int64_t prev = ((t + 1) % 2) * static_cast<std::int64_t>(nh);
            std::int64_t u0 = 0;
            for (int k = 0; k < 4; ++k) {
                auto &p = w.programs[k];
                const int nu = units[k];
                if (t > 0)
                    p.wait(SubRoi::Sync, peer[k], 3);
                p.read(SubRoi::InputLoad, xseq, static_cast<std::int64_t>(t) * x, x);
                p.read(SubRoi::InputLoad, hbuf, prev, nh);
                if (nu > 0) {
                    cellMvm(p, static_cast<std::int64_t>(in_rows) * 4 * u0, nu, 0);
                    cellUpdate(p, cstate[k], nu);
                }
                p.wait(SubRoi::Sync, free[k]);
                if (nu > 0)
                    p.write(SubRoi::GateCombination, hbuf, cur + u0, nu);
                std::vector<int> to;
                for (int j = 0; j < 4; ++j)
                    if (j != k)
                        to.push_back(peer[j]);
                to.push_back(full);
                p.signal(SubRoi::Sync, to);
                u0 += nu;
            }
            auto &pd = w.programs[4];
            pd.wait(SubRoi::Sync, full, 4);
            pd.read(SubRoi::InputLoad, hbuf, cur, nh);
            pd.signal(SubRoi::Sync, {free[0], free[1], free[2], free[3]});
            denseLayer(pd, t, 0, 0);
        }
    }
    checkCores(w, cfg);
    return w;
}

// ---------------------------------------------------------------- CNN

Workload
buildCnn(const CnnSpec &s, Mapping m, const SystemConfig &cfg,
         const SoftwareCosts &sw)
{
    s.validate();
    sw.validate();
    const Emitter e(sw);
    const bool analog = m == Mapping::Analog;
    const auto geo = cnnGeometry(s);
    const int L = static_cast<int>(geo.size());
    const int N = s.n_inferences;
    const int dense_a = L, dense_b = L + 1, final_core = L + 2;
    Workload w;
    w.name = "cnn_" + s.variant + "_" + std::string(mappingName(m));
    w.programs.resize(L + 3);
    checkCores(w, cfg);

    const std::int64_t img = static_cast<std::int64_t>(s.in_h) * s.in_w * s.in_c;
    const int image = w.addRegion("image", img * N);
    std::vector<int> fm(L), scratch(L), wconv(L, -1);
    std::vector<std::int64_t> fm_bytes(L);
    for (int l = 0; l < L; ++l) {
        const auto &g = geo[l];
        fm_bytes[l] = static_cast<std::int64_t>(g.pool_h) * g.pool_w * g.cols;
        fm[l] = w.addRegion("fm" + std::to_string(l + 1), 2 * fm_bytes[l]);
        scratch[l] = w.addRegion(
            "conv_rows" + std::to_string(l + 1),
            static_cast<std::int64_t>(s.conv[l].pool) * g.out_w * g.cols);
        if (analog)
            bindTile(w, l, g.rows, g.cols, cfg);
        else
            wconv[l] = w.addRegion("w_conv" + std::to_string(l + 1),
                                   static_cast<std::int64_t>(g.rows) * g.cols);
    }
    const std::int64_t flat = cnnFlattenSize(s);
    const int d0 = s.dense[0];
    const int part[2] = {d0 - d0 / 2, d0 / 2};
    const int wd0 = w.addRegion("w_dense1", flat * d0);
    const int d1out = w.addRegion("dense1_out", 2LL * d0);
    std::vector<int> wd;
    for (std::size_t d = 1; d < s.dense.size(); ++d)
        wd.push_back(w.addRegion("w_dense" + std::to_string(d + 1),
                                 static_cast<std::int64_t>(s.dense[d - 1]) *
                                     s.dense[d]));
    const int output =
        w.addRegion("output", static_cast<std::int64_t>(N) * s.dense.back());

    // ready[l]: pooled rows of fm[l-1] available to conv l; free[l]: slots of
    // fm[l] released by its consumers.
    std::vector<int> ready(L, -1), free(L);
    for (int l = 1; l < L; ++l)
        ready[l] = w.addChannel("rows_to_conv" + std::to_string(l + 1), 0);
    const int ready_dense[2] = {w.addChannel("rows_to_dense_a", 0),
                                w.addChannel("rows_to_dense_b", 0)};
    for (int l = 0; l < L; ++l)
        free[l] = w.addChannel("fm" + std::to_string(l + 1) + "_free",
                               l + 1 < L ? 2 : 4);
    const int d1_free[2] = {w.addChannel("dense1_free_a", 2),
                            w.addChannel("dense1_free_b", 2)};
    const int d1_ready = w.addChannel("dense1_ready", 0);

    for (int i = 0; i < N; ++i) {
        const int slot = i % 2;
        for (int l = 0; l < L; ++l) {
            auto &p = w.programs[l];
            const auto &g = geo[l];
            const auto &layer = s.conv[l];
            const bool last = l + 1 == L;
            const std::int64_t in_row = static_cast<std::int64_t>(g.in_w) * g.in_c;
            const std::int64_t out_row = static_cast<std::int64_t>(g.out_w) * g.cols;
            const std::int64_t pooled_row =
                static_cast<std::int64_t>(g.pool_w) * g.cols;
            const int in_region = l == 0 ? image : fm[l - 1];
            const std::int64_t in_base =
                l == 0 ? i * img : slot * fm_bytes[l - 1];
            p.wait(SubRoi::Sync, free[l], last ? 2 : 1);
            int have = 0;
            int pooled = 0;
            int next_row = 0; // first input row not yet loaded
            for (int oy = 0; oy < g.out_h; ++oy) {
                const int first = std::max(0, oy * layer.stride - layer.pad);
                const int need =
                    std::min(g.in_h, oy * layer.stride - layer.pad + layer.k);
                if (l > 0 && need > have) {
                    p.wait(SubRoi::Sync, ready[l], need - have);
                    have = need;
                }
                const int from = std::max(first, next_row);
                if (need > from)
                    p.read(SubRoi::InputLoad, in_region,
                           in_base + from * in_row, (need - from) * in_row);
                next_row = std::max(next_row, need);
                if (analog) {
                    p.compute(SubRoi::AnalogQueue, 0, 0,
                              words(g.rows) * sw.queue_word_ops * g.out_w);
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        p.queueVector(SubRoi::AnalogQueue, 0, g.rows);
                        e.process(p);
                        p.dequeueVector(SubRoi::AnalogDequeue, 0, g.cols);
                    }
                    p.compute(SubRoi::AnalogDequeue, 0, 0,
                              words(g.cols) * sw.dequeue_word_ops * g.out_w);
                } else {
                    // One im2col column per pixel against the full
                    // weight matrix, as the tile would see it.
                    for (int ox = 0; ox < g.out_w; ++ox) {
                        p.compute(SubRoi::DigitalMvm, 0, 0,
                                  words(g.rows) * sw.im2col_word_ops);
                        e.digitalMvm(p, wconv[l], 0, g.rows, g.cols);
                    }
                }
                // Max pooling commutes with the monotone activation, so
                // pooled layers activate after pooling.
                if (layer.pool == 1)
                    e.relu(p, out_row);
                const int in_pool = oy % layer.pool;
                p.write(SubRoi::DigitalActivation, scratch[l], in_pool * out_row,
                        out_row);
                if (in_pool + 1 == layer.pool && pooled < g.pool_h) {
                    if (layer.pool > 1) {
                        p.read(SubRoi::PoolNorm, scratch[l], 0,
                               layer.pool * out_row);
                        p.compute(SubRoi::PoolNorm,
                                  static_cast<std::int64_t>(layer.pool) *
                                      layer.pool * pooled_row);
                        e.relu(p, pooled_row);
                    }
                    if (layer.lrn)
                        p.compute(SubRoi::PoolNorm, 0,
                                  e.vec(pooled_row) * sw.lrn_ops);
                    p.write(SubRoi::OutputWriteback, fm[l],
                            slot * fm_bytes[l] + pooled * pooled_row,
                            pooled_row);
                    ++pooled;
                    if (last)
                        p.signal(SubRoi::Sync, {ready_dense[0], ready_dense[1]});
                    else
                        p.signal(SubRoi::Sync, {ready[l + 1]});
                }
            }
            if (l > 0) {
                if (have < g.in_h)
                    p.wait(SubRoi::Sync, ready[l], g.in_h - have);
                p.signal(SubRoi::Sync, {free[l - 1]});
            }
        }

        const auto &gl = geo.back();
        std::int64_t col0 = 0;
        for (int k = 0; k < 2; ++k) {
            auto &p = w.programs[k == 0 ? dense_a : dense_b];
            p.wait(SubRoi::Sync, ready_dense[k], gl.pool_h);
            p.read(SubRoi::InputLoad, fm[L - 1], slot * fm_bytes[L - 1], flat);
            p.signal(SubRoi::Sync, {free[L - 1]});
            if (part[k] > 0) {
                e.digitalMvm(p, wd0, flat * col0, flat, part[k]);
                e.relu(p, part[k]);
            }
            p.wait(SubRoi::Sync, d1_free[k]);
            if (part[k] > 0)
                p.write(SubRoi::DigitalActivation, d1out,
                        static_cast<std::int64_t>(slot) * d0 + col0, part[k]);
            p.signal(SubRoi::Sync, {d1_ready});
            col0 += part[k];
        }

        auto &pf = w.programs[final_core];
        pf.wait(SubRoi::Sync, d1_ready, 2);
        pf.read(SubRoi::InputLoad, d1out, static_cast<std::int64_t>(slot) * d0, d0);
        pf.signal(SubRoi::Sync, {d1_free[0], d1_free[1]});
        for (std::size_t d = 1; d < s.dense.size(); ++d) {
            e.digitalMvm(pf, wd[d - 1], 0, s.dense[d - 1], s.dense[d]);
            if (d + 1 < s.dense.size())
                e.relu(pf, s.dense[d]);
        }
        e.softmax(pf, s.dense.back());
        pf.write(SubRoi::OutputWriteback, output,
                 static_cast<std::int64_t>(i) * s.dense.back(), s.dense.back());
    }
    return w;
}

Workload
build(const ModelSpec &spec, Mapping m, const SystemConfig &cfg,
      const SoftwareCosts &sw)
{
    return std::visit(
        [&](const auto &s) -> Workload {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MlpSpec>)
                return buildMlp(s, m, cfg, sw);
            else if constexpr (std::is_same_v<T, LstmSpec>)
                return buildLstm(s, m, cfg, sw);
            else
                return buildCnn(s, m, cfg, sw);
        },
        spec);
}

// ---------------------------------------------------------------- model JSON

namespace {

template <typename T>
void
opt(const json &j, const char *key, T &out)
{
    if (j.contains(key))
        out = j.at(key).get<T>();
}

void
knownKeys(const json &j, std::initializer_list<std::string_view> keys,
          const char *what)
{
    for (const auto &[k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end())
            throw ModelError(std::string("unknown key '") + k + "' in " + what);
}

} // namespace

ModelSpec
modelFromJson(const json &j)
{
    try {
        const auto kind = j.at("model").get<std::string>();
        if (kind == "mlp") {
            knownKeys(j, {"model", "name", "case", "inferences", "n"},
                      "MLP description");
            MlpSpec s;
            opt(j, "n", s.n);
            opt(j, "case", s.case_id);
            opt(j, "inferences", s.n_inferences);
            s.validate();
            return s;
        }
        if (kind == "lstm") {
            knownKeys(j, {"model", "name", "case", "inferences", "x", "y", "n_h"},
                      "LSTM description");
            LstmSpec s;
            opt(j, "x", s.x);
            opt(j, "y", s.y);
            opt(j, "n_h", s.n_h);
            opt(j, "case", s.case_id);
            opt(j, "inferences", s.n_inferences);
            s.validate();
            return s;
        }
        if (kind == "cnn") {
            knownKeys(j, {"model", "name", "case", "inferences", "variant",
                          "input", "conv", "dense"},
                      "CNN description");
            CnnSpec s;
            if (j.contains("variant"))
                s = CnnSpec::fromVariant(j.at("variant").get<std::string>());
            if (j.contains("name"))
                s.variant = j.at("name").get<std::string>();
            if (j.contains("input")) {
                const auto in = j.at("input").get<std::vector<int>>();
                if (in.size() != 3)
                    throw ModelError("CNN input must be [h, w, c]");
                s.in_h = in[0];
                s.in_w = in[1];
                s.in_c = in[2];
            }
            if (j.contains("conv")) {
                s.conv.clear();
                for (const auto &c : j.at("conv")) {
                    knownKeys(c, {"kernels", "k", "stride", "pad", "pool", "lrn"},
                              "conv layer");
                    ConvLayer l;
                    l.kernels = c.at("kernels").get<int>();
                    l.k = c.at("k").get<int>();
                    opt(c, "stride", l.stride);
                    opt(c, "pad", l.pad);
                    opt(c, "pool", l.pool);
                    opt(c, "lrn", l.lrn);
                    s.conv.push_back(l);
                }
            }
            opt(j, "dense", s.dense);
            opt(j, "inferences", s.n_inferences);
            s.validate();
            return s;
        }
        throw ModelError("unknown model kind '" + kind + "'");
    } catch (const json::exception &e) {
        throw ModelError(std::string("model description: ") + e.what());
    }
}

json
modelToJson(const ModelSpec &spec)
{
    return std::visit(
        [](const auto &s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MlpSpec>) {
                return {{"model", "mlp"},
                        {"n", s.n},
                        {"case", s.case_id},
                        {"inferences", s.n_inferences}};
            } else if constexpr (std::is_same_v<T, LstmSpec>) {
                return {{"model", "lstm"}, {"x", s.x},
                        {"y", s.y},         {"n_h", s.n_h},
                        {"case", s.case_id}, {"inferences", s.n_inferences}};
            } else {
                json conv = json::array();
                for (const auto &l : s.conv)
                    conv.push_back({{"kernels", l.kernels},
                                    {"k", l.k},
                                    {"stride", l.stride},
                                    {"pad", l.pad},
                                    {"pool", l.pool},
                                    {"lrn", l.lrn}});
                return {{"model", "cnn"},
                        {"name", s.variant},
                        {"input", {s.in_h, s.in_w, s.in_c}},
                        {"conv", conv},
                        {"dense", s.dense},
                        {"inferences", s.n_inferences}};
            }
        },
        spec);
}

} // namespace alpine
