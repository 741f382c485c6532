#include "dpsr/q_model.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "dpsr/errors.hpp"

namespace dpsr {

std::vector<double> QFunction::q_values(std::span<const double> state) const {
    if (state.size() != input_dim()) {
        throw ShapeError("state has " + std::to_string(state.size()) + " entries, expected " +
                         std::to_string(input_dim()));
    }
    const Eigen::Map<const Eigen::VectorXd> column(state.data(), static_cast<Eigen::Index>(state.size()));
    const Eigen::MatrixXd q = q_values_batch(column);
    return {q.data(), q.data() + q.size()};
}

// ---------------------------------------------------------------------------
// DenseQNet

DenseQNet::DenseQNet(std::size_t input_dim, std::size_t action_count, std::vector<std::size_t> hidden) {
    if (input_dim == 0 || action_count == 0) {
        throw ShapeError("network needs at least one input and one action");
    }
    layer_sizes_.push_back(input_dim);
    for (std::size_t h : hidden) {
        if (h == 0) {
            throw ShapeError("hidden layer of width 0");
        }
        layer_sizes_.push_back(h);
    }
    layer_sizes_.push_back(action_count);
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(layer_sizes_[l]);
        const auto out = static_cast<Eigen::Index>(layer_sizes_[l + 1]);
        layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
    }
}

void DenseQNet::initialize(Rng& rng) {
    for (Layer& layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weights.cols()));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            layer.bias(r) = (2.0 * rng.uniform() - 1.0) * bound;
        }
    }
}

std::size_t DenseQNet::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& layer : layers_) {
        n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    }
    return n;
}

Eigen::MatrixXd DenseQNet::q_values_batch(const Eigen::MatrixXd& states) const {
    if (static_cast<std::size_t>(states.rows()) != input_dim()) {
        throw ShapeError("state batch has " + std::to_string(states.rows()) + " rows, expected " +
                         std::to_string(input_dim()));
    }
    Eigen::MatrixXd activation = states;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weights * activation;
        z.colwise() += layers_[l].bias;
        if (l + 1 < layers_.size()) {
            z = z.cwiseMax(0.0);
        }
        activation = std::move(z);
    }
    return activation;
}

std::vector<DenseQNet::Layer> DenseQNet::backward(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                                  std::span<const double> scales) const {
    const Eigen::Index batch = states.cols();
    if (static_cast<std::size_t>(states.rows()) != input_dim() || actions.size() != static_cast<std::size_t>(batch) ||
        scales.size() != static_cast<std::size_t>(batch)) {
        throw ShapeError("gradient batch dimensions disagree");
    }

    // Forward pass keeping each layer's input and pre-activation.
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> pre;
    inputs.reserve(layers_.size());
    pre.reserve(layers_.size());
    inputs.push_back(states);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weights * inputs.back();
        z.colwise() += layers_[l].bias;
        pre.push_back(z);
        if (l + 1 < layers_.size()) {
            inputs.push_back(z.cwiseMax(0.0));
        }
    }

    Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(action_count()), batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
        const Action a = actions[static_cast<std::size_t>(i)];
        if (a >= action_count()) {
            throw ShapeError("action " + std::to_string(a) + " out of range");
        }
        upstream(static_cast<Eigen::Index>(a), i) = scales[static_cast<std::size_t>(i)];
    }

    std::vector<Layer> grads(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
        if (l + 1 < layers_.size()) {
            upstream = upstream.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
        }
        grads[l].weights.noalias() = upstream * inputs[l].transpose();
        grads[l].bias = upstream.rowwise().sum();
        if (l > 0) {
            upstream = layers_[l].weights.transpose() * upstream;
        }
    }
    return grads;
}

void DenseQNet::apply_scaled_gradients(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                       std::span<const double> scales, double eta) {
    const std::vector<Layer> grads = backward(states, actions, scales);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].weights += eta * grads[l].weights;
        layers_[l].bias += eta * grads[l].bias;
    }
}

std::vector<double> DenseQNet::gradient(std::span<const double> state, Action action) const {
    const Eigen::Map<const Eigen::VectorXd> column(state.data(), static_cast<Eigen::Index>(state.size()));
    const Action actions[] = {action};
    const double scales[] = {1.0};
    const std::vector<Layer> grads = backward(column, actions, scales);
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Layer& g : grads) {
        for (Eigen::Index r = 0; r < g.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < g.weights.cols(); ++c) {
                flat.push_back(g.weights(r, c));
            }
        }
        for (Eigen::Index r = 0; r < g.bias.size(); ++r) {
            flat.push_back(g.bias(r));
        }
    }
    return flat;
}

std::vector<std::uint32_t> DenseQNet::shape() const {
    return {layer_sizes_.begin(), layer_sizes_.end()};
}

std::vector<double> DenseQNet::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Layer& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                flat.push_back(layer.weights(r, c));
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            flat.push_back(layer.bias(r));
        }
    }
    return flat;
}

void DenseQNet::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count()) {
        throw ShapeError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    std::size_t i = 0;
    for (Layer& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = params[i++];
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            layer.bias(r) = params[i++];
        }
    }
}

std::unique_ptr<QFunction> DenseQNet::clone() const { return std::make_unique<DenseQNet>(*this); }

// ---------------------------------------------------------------------------
// TabularQ

TabularQ::TabularQ(std::size_t state_count, std::size_t action_count, std::size_t input_dim, StateIndexer indexer)
    : state_count_(state_count),
      action_count_(action_count),
      input_dim_(input_dim),
      indexer_(std::move(indexer)),
      table_(state_count * action_count, 0.0) {
    if (state_count == 0 || action_count == 0 || input_dim == 0) {
        throw ShapeError("tabular Q needs positive state, action and input counts");
    }
    if (!indexer_) {
        throw ShapeError("tabular Q needs a state indexer");
    }
}

std::size_t TabularQ::index_of(std::span<const double> state) const {
    const std::size_t s = indexer_(state);
    if (s >= state_count_) {
        throw ShapeError("state id " + std::to_string(s) + " out of range");
    }
    return s;
}

double TabularQ::value(std::size_t state, Action action) const {
    if (state >= state_count_ || action >= action_count_) {
        throw ShapeError("table index out of range");
    }
    return table_[state * action_count_ + action];
}

void TabularQ::set_value(std::size_t state, Action action, double v) {
    if (state >= state_count_ || action >= action_count_) {
        throw ShapeError("table index out of range");
    }
    table_[state * action_count_ + action] = v;
}

Eigen::MatrixXd TabularQ::q_values_batch(const Eigen::MatrixXd& states) const {
    if (static_cast<std::size_t>(states.rows()) != input_dim_) {
        throw ShapeError("state batch has wrong dimension");
    }
    Eigen::MatrixXd q(static_cast<Eigen::Index>(action_count_), states.cols());
    for (Eigen::Index i = 0; i < states.cols(); ++i) {
        const std::size_t s = index_of({states.col(i).data(), input_dim_});
        for (std::size_t a = 0; a < action_count_; ++a) {
            q(static_cast<Eigen::Index>(a), i) = table_[s * action_count_ + a];
        }
    }
    return q;
}

void TabularQ::apply_scaled_gradients(const Eigen::MatrixXd& states, std::span<const Action> actions,
                                      std::span<const double> scales, double eta) {
    if (static_cast<std::size_t>(states.rows()) != input_dim_ || actions.size() != scales.size() ||
        actions.size() != static_cast<std::size_t>(states.cols())) {
        throw ShapeError("gradient batch dimensions disagree");
    }
    // Accumulate first so every element sees the pre-update table.
    std::vector<double> delta(table_.size(), 0.0);
    for (Eigen::Index i = 0; i < states.cols(); ++i) {
        const std::size_t s = index_of({states.col(i).data(), input_dim_});
        const Action a = actions[static_cast<std::size_t>(i)];
        if (a >= action_count_) {
            throw ShapeError("action out of range");
        }
        delta[s * action_count_ + a] += scales[static_cast<std::size_t>(i)];
    }
    for (std::size_t j = 0; j < table_.size(); ++j) {
        table_[j] += eta * delta[j];
    }
}

std::vector<std::uint32_t> TabularQ::shape() const {
    return {static_cast<std::uint32_t>(state_count_), static_cast<std::uint32_t>(action_count_)};
}

std::vector<double> TabularQ::parameters() const { return table_; }

void TabularQ::set_parameters(std::span<const double> params) {
    if (params.size() != table_.size()) {
        throw ShapeError("expected " + std::to_string(table_.size()) + " table entries");
    }
    table_.assign(params.begin(), params.end());
}

std::unique_ptr<QFunction> TabularQ::clone() const { return std::make_unique<TabularQ>(*this); }

// ---------------------------------------------------------------------------
// Free functions

Action argmax_action(std::span<const double> q) {
    Action best = 0;
    for (Action a = 1; a < q.size(); ++a) {
        if (q[a] > q[best]) {
            best = a;
        }
    }
    return best;
}

Action greedy_action(const QFunction& qf, std::span<const double> state) {
    const std::vector<double> q = qf.q_values(state);
    return argmax_action(q);
}

double td_error(const QFunction& qf, const QFunction& target, const Experience& exp, double discount) {
    const std::vector<double> q = qf.q_values(exp.state);
    if (exp.action >= q.size()) {
        throw ShapeError("experience action out of range");
    }
    double bootstrap = 0.0;
    if (!exp.terminal) {
        const Action next = greedy_action(qf, exp.next_state);
        bootstrap = discount * target.q_values(exp.next_state)[next];
    }
    return exp.reward + bootstrap - q[exp.action];
}

Eigen::MatrixXd stack_states(std::span<const Observation* const> states, std::size_t dim) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i]->size() != dim) {
            throw ShapeError("observation of size " + std::to_string(states[i]->size()) + ", expected " +
                             std::to_string(dim));
        }
        for (std::size_t d = 0; d < dim; ++d) {
            m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = (*states[i])[d];
        }
    }
    return m;
}

std::vector<double> td_errors(const QFunction& qf, const QFunction& target,
                              std::span<const Experience* const> batch, double discount) {
    std::vector<const Observation*> states;
    std::vector<const Observation*> next_states;
    states.reserve(batch.size());
    next_states.reserve(batch.size());
    for (const Experience* e : batch) {
        states.push_back(&e->state);
        next_states.push_back(&e->next_state);
    }
    const Eigen::MatrixXd s = stack_states(states, qf.input_dim());
    const Eigen::MatrixXd s_next = stack_states(next_states, qf.input_dim());
    const Eigen::MatrixXd q = qf.q_values_batch(s);
    const Eigen::MatrixXd q_next = qf.q_values_batch(s_next);
    const Eigen::MatrixXd q_next_target = target.q_values_batch(s_next);

    std::vector<double> deltas(batch.size());
    const auto actions = static_cast<std::size_t>(q.rows());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Experience& e = *batch[i];
        const auto col = static_cast<Eigen::Index>(i);
        if (e.action >= actions) {
            throw ShapeError("experience action out of range");
        }
        double bootstrap = 0.0;
        if (!e.terminal) {
            const Action next = argmax_action({q_next.col(col).data(), actions});
            bootstrap = discount * q_next_target(static_cast<Eigen::Index>(next), col);
        }
        deltas[i] = e.reward + bootstrap - q(static_cast<Eigen::Index>(e.action), col);
    }
    return deltas;
}

void apply_weighted_update(QFunction& qf, std::span<const WeightedTransition> batch, double eta) {
    if (batch.empty()) {
        return;
    }
    std::vector<const Observation*> states;
    std::vector<Action> actions;
    std::vector<double> scales;
    states.reserve(batch.size());
    actions.reserve(batch.size());
    scales.reserve(batch.size());
    for (const WeightedTransition& t : batch) {
        states.push_back(&t.experience->state);
        actions.push_back(t.experience->action);
        scales.push_back(t.weight * t.delta);
    }
    qf.apply_scaled_gradients(stack_states(states, qf.input_dim()), actions, scales, eta);
}

void sync_target(const QFunction& qf, QFunction& target) {
    if (qf.shape() != target.shape()) {
        throw ShapeError("cannot sync target: architectures differ");
    }
    target.set_parameters(qf.parameters());
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    }
    out.write(bytes, 8);
}

std::uint64_t read_le(std::istream& in, int width) {
    unsigned char bytes[8] = {};
    in.read(reinterpret_cast<char*>(bytes), width);
    if (!in) {
        throw IoError("truncated parameter stream");
    }
    std::uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) {
        v = (v << 8) | bytes[i];
    }
    return v;
}

}  // namespace

void save_parameters(const QFunction& qf, std::ostream& out) {
    const std::vector<std::uint32_t> shape = qf.shape();
    write_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::uint32_t s : shape) {
        write_u32(out, s);
    }
    for (double p : qf.parameters()) {
        write_u64(out, std::bit_cast<std::uint64_t>(p));
    }
    if (!out) {
        throw IoError("failed writing parameters");
    }
}

void load_parameters(QFunction& qf, std::istream& in) {
    const auto count = static_cast<std::uint32_t>(read_le(in, 4));
    std::vector<std::uint32_t> shape(count);
    for (auto& s : shape) {
        s = static_cast<std::uint32_t>(read_le(in, 4));
    }
    if (shape != qf.shape()) {
        throw ShapeError("stored parameter shape does not match the model");
    }
    std::vector<double> params(qf.parameters().size());
    for (double& p : params) {
        p = std::bit_cast<double>(read_le(in, 8));
    }
    qf.set_parameters(params);
}

}  // namespace dpsr
