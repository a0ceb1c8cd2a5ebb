import logging

import numpy as np
import scipy.sparse as sp

from src.config import GmpConfig
from src.constants import DYNAMIC_FEATURE_DIM
from src.features import dynamic_features
from src.models import clamp_opinion


def expected_shapes(config):
    """
    Named tensor shapes; matrices act on row vectors (X @ W).
    Hidden GAT layers use `heads` x `head_dim` with concatenation,
    the last layer is a single head regressing one value.
    """
    hidden = config.hidden_dim
    shapes = {
        "dyn.W1": (DYNAMIC_FEATURE_DIM, hidden),
        "dyn.b1": (hidden,),
        "dyn.W2": (hidden, hidden),
        "dyn.b2": (hidden,),
        "static.W1": (config.profile_dim, hidden),
        "static.b1": (hidden,),
        "static.W2": (hidden, hidden),
        "static.b2": (hidden,),
    }
    in_dim = 2 * hidden
    for layer, (heads, out) in enumerate(layer_dims(config)):
        shapes[f"gat{layer}.W"] = (in_dim, heads * out)
        shapes[f"gat{layer}.a_dst"] = (heads, out)
        shapes[f"gat{layer}.a_src"] = (heads, out)
        shapes[f"gat{layer}.a_edge"] = (heads, out)
        shapes[f"gat{layer}.W_edge"] = (heads, out)
        shapes[f"gat{layer}.bias"] = (heads * out,)
        in_dim = heads * out
    return shapes


def layer_dims(config):
    return [(config.heads, config.head_dim)] * (config.depth - 1) + [(1, 1)]


class GmpParams:
    """
    Immutable bundle of named float64 tensors for the projection MLPs and the GAT stack.
    """

    def __init__(self, tensors, config=None):
        self.config = config or GmpConfig()
        shapes = expected_shapes(self.config)
        missing = sorted(set(shapes) - set(tensors))
        extra = sorted(set(tensors) - set(shapes))
        if missing or extra:
            raise ValueError(f"Parameter names do not match config: missing={missing}, unexpected={extra}")

        self.tensors = {}
        for name, shape in shapes.items():
            value = np.array(tensors[name], dtype=np.float64)
            if value.shape != shape:
                raise ValueError(f"Parameter {name} has shape {value.shape}, expected {shape}")
            value.setflags(write=False)
            self.tensors[name] = value

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    @property
    def names(self):
        return list(self.tensors)

    def shapes(self):
        return {name: value.shape for name, value in self.tensors.items()}

    @property
    def n_parameters(self):
        return int(sum(value.size for value in self.tensors.values()))

    def replace(self, updates):
        tensors = dict(self.tensors)
        tensors.update(updates)
        return GmpParams(tensors, self.config)

    def step(self, grads, learning_rate):
        return GmpParams({name: value - learning_rate * grads[name] for name, value in self.tensors.items()},
                         self.config)


def init_params(config, rng):
    tensors = {}
    for name, shape in expected_shapes(config).items():
        if name.endswith(("b1", "b2", "bias")):
            tensors[name] = np.zeros(shape)
        else:
            fan_in, fan_out = (shape[0], shape[1]) if len(shape) == 2 else (shape[0], 1)
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return GmpParams(tensors, config)


def zero_params(config=None):
    config = config or GmpConfig()
    return GmpParams({name: np.zeros(shape) for name, shape in expected_shapes(config).items()}, config)


def _mlp_forward(inputs, params, prefix):
    pre = inputs @ params[f"{prefix}.W1"] + params[f"{prefix}.b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ params[f"{prefix}.W2"] + params[f"{prefix}.b2"], {"inputs": inputs, "pre": pre, "hidden": hidden}


def _mlp_backward(grad_out, cache, params, prefix, grads):
    grads[f"{prefix}.b2"] = grad_out.sum(axis=0)
    grads[f"{prefix}.W2"] = cache["hidden"].T @ grad_out
    grad_hidden = (grad_out @ params[f"{prefix}.W2"].T) * (cache["pre"] > 0)
    grads[f"{prefix}.b1"] = grad_hidden.sum(axis=0)
    grads[f"{prefix}.W1"] = cache["inputs"].T @ grad_hidden


def project_static(phi_s, params):
    phi_s = np.asarray(phi_s, dtype=np.float64)
    if phi_s.ndim != 2 or phi_s.shape[1] != params["static.W1"].shape[0]:
        raise ValueError(f"Static features of shape {phi_s.shape} do not match profile dim "
                         f"{params['static.W1'].shape[0]}")
    return _mlp_forward(phi_s, params, "static")


def project_features(phi_d, phi_s, params, static_cache=None):
    """
    X = [MLP_dyn(phi_d) || MLP_static(phi_s)]; returns X and the activations needed for backward.
    """
    phi_d = np.asarray(phi_d, dtype=np.float64)
    if phi_d.ndim != 2 or phi_d.shape[1] != DYNAMIC_FEATURE_DIM:
        raise ValueError(f"Dynamic features must be N x {DYNAMIC_FEATURE_DIM}, got {phi_d.shape}")
    x_d, dyn_cache = _mlp_forward(phi_d, params, "dyn")
    if static_cache is None:
        x_s, static_cache = project_static(phi_s, params)
    else:
        x_s = static_cache[0]
        static_cache = static_cache[1]
    if x_s.shape[0] != x_d.shape[0]:
        raise ValueError(f"Dynamic rows {x_d.shape[0]} and static rows {x_s.shape[0]} differ")
    return np.hstack([x_d, x_s]), {"dyn": dyn_cache, "static": static_cache}


def _segment_softmax(logits, edges):
    seg_max = np.maximum.reduceat(logits, edges.dst_starts, axis=0)
    shifted = np.exp(logits - seg_max[edges.dst])
    seg_sum = np.add.reduceat(shifted, edges.dst_starts, axis=0)
    return shifted / seg_sum[edges.dst]


def _attention_matrix(alpha_head, edges):
    indptr = np.append(edges.dst_starts, edges.n_edges)
    return sp.csr_matrix((alpha_head, edges.src, indptr), shape=(edges.n_nodes, edges.n_nodes))


def _gat_layer_forward(inputs, edges, params, layer, heads, out, slope):
    n = inputs.shape[0]
    projected = (inputs @ params[f"gat{layer}.W"]).reshape(n, heads, out)
    score_dst = np.einsum("nho,ho->nh", projected, params[f"gat{layer}.a_dst"])
    score_src = np.einsum("nho,ho->nh", projected, params[f"gat{layer}.a_src"])
    edge_gain = np.sum(params[f"gat{layer}.W_edge"] * params[f"gat{layer}.a_edge"], axis=1)

    logits = score_dst[edges.dst] + score_src[edges.src] + edges.weight[:, None] * edge_gain[None, :]
    activated = np.where(logits > 0, logits, slope * logits)
    alpha = _segment_softmax(activated, edges)

    aggregated = np.empty_like(projected)
    for h in range(heads):
        aggregated[:, h, :] = _attention_matrix(alpha[:, h], edges) @ projected[:, h, :]
    output = aggregated.reshape(n, heads * out) + params[f"gat{layer}.bias"]

    cache = {"inputs": inputs, "projected": projected, "logits": logits, "alpha": alpha}
    return output, cache


def _gat_layer_backward(grad_output, cache, edges, params, layer, heads, out, slope, grads):
    n = grad_output.shape[0]
    projected, alpha, logits = cache["projected"], cache["alpha"], cache["logits"]
    grads[f"gat{layer}.bias"] = grad_output.sum(axis=0)
    grad_agg = grad_output.reshape(n, heads, out)

    grad_projected = np.empty_like(projected)
    grad_alpha = np.empty_like(alpha)
    for h in range(heads):
        grad_projected[:, h, :] = _attention_matrix(alpha[:, h], edges).T @ grad_agg[:, h, :]
        grad_alpha[:, h] = np.einsum("eo,eo->e", grad_agg[edges.dst, h, :], projected[edges.src, h, :])

    weighted = np.add.reduceat(alpha * grad_alpha, edges.dst_starts, axis=0)
    grad_activated = alpha * (grad_alpha - weighted[edges.dst])
    grad_logits = grad_activated * np.where(logits > 0, 1.0, slope)

    grad_dst = np.add.reduceat(grad_logits, edges.dst_starts, axis=0)
    grad_src = np.add.reduceat(grad_logits[edges.src_order], edges.src_starts, axis=0)
    grad_gain = edges.weight @ grad_logits

    a_dst, a_src = params[f"gat{layer}.a_dst"], params[f"gat{layer}.a_src"]
    grads[f"gat{layer}.a_dst"] = np.einsum("nh,nho->ho", grad_dst, projected)
    grads[f"gat{layer}.a_src"] = np.einsum("nh,nho->ho", grad_src, projected)
    grads[f"gat{layer}.a_edge"] = grad_gain[:, None] * params[f"gat{layer}.W_edge"]
    grads[f"gat{layer}.W_edge"] = grad_gain[:, None] * params[f"gat{layer}.a_edge"]

    grad_projected += grad_dst[:, :, None] * a_dst[None, :, :] + grad_src[:, :, None] * a_src[None, :, :]
    grad_flat = grad_projected.reshape(n, heads * out)
    grads[f"gat{layer}.W"] = cache["inputs"].T @ grad_flat
    return grad_flat @ params[f"gat{layer}.W"].T


def gat_forward(inputs, edges, params):
    """
    Stacked edge-featured graph attention over the interaction graph with
    self-loops. Hidden layers apply ReLU to the concatenated heads, the last
    layer applies tanh. Returns the N predictions and the activation cache.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[0] != edges.n_nodes:
        raise ValueError(f"Feature rows {inputs.shape[0]} do not match graph size {edges.n_nodes}")
    config = params.config
    layers = []
    hidden = inputs
    dims = layer_dims(config)
    for layer, (heads, out) in enumerate(dims):
        output, cache = _gat_layer_forward(hidden, edges, params, layer, heads, out, config.leaky_slope)
        if layer < len(dims) - 1:
            cache["pre"] = output
            hidden = np.maximum(output, 0.0)
        else:
            hidden = np.tanh(output)
        layers.append(cache)
    prediction = hidden[:, 0]
    return prediction, {"layers": layers, "prediction": prediction, "edges": edges}


def attention_weights(cache):
    return [layer["alpha"] for layer in cache["layers"]]


def gmp_forward(phi_d, phi_s, edges, params, static_cache=None):
    inputs, projection_cache = project_features(phi_d, phi_s, params, static_cache)
    prediction, cache = gat_forward(inputs, edges, params)
    cache["projection"] = projection_cache
    return prediction, cache


def gmp_backward(cache, grad_prediction, params):
    """
    Reverse-mode gradients of every named tensor given dL/d(prediction).
    """
    config = params.config
    edges = cache["edges"]
    dims = layer_dims(config)
    grads = {}

    grad = (np.asarray(grad_prediction, dtype=np.float64) * (1.0 - cache["prediction"] ** 2))[:, None]
    for layer in reversed(range(len(dims))):
        layer_cache = cache["layers"][layer]
        if layer < len(dims) - 1:
            grad = grad * (layer_cache["pre"] > 0)
        heads, out = dims[layer]
        grad = _gat_layer_backward(grad, layer_cache, edges, params, layer, heads, out, config.leaky_slope, grads)

    if "projection" in cache:
        hidden = config.hidden_dim
        _mlp_backward(grad[:, :hidden], cache["projection"]["dyn"], params, "dyn", grads)
        _mlp_backward(grad[:, hidden:], cache["projection"]["static"], params, "static", grads)
    return grads


def gmp_loss(predicted, truth, alpha, beta):
    """
    alpha * mean_t mean_i (pred - truth)^2 + beta * mean_t (mean_i pred - mean_i truth)^2
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if predicted.shape != truth.shape:
        raise ValueError(f"Prediction shape {predicted.shape} does not match truth shape {truth.shape}")
    local = np.mean((predicted - truth) ** 2)
    global_ = np.mean((predicted.mean(axis=0) - truth.mean(axis=0)) ** 2)
    return float(alpha * local + beta * global_)


def gmp_loss_gradient(predicted, truth, alpha, beta):
    predicted = np.asarray(predicted, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    n, steps = predicted.shape
    local = 2.0 * alpha * (predicted - truth) / (n * steps)
    global_ = 2.0 * beta * (predicted.mean(axis=0) - truth.mean(axis=0)) / (n * steps)
    return local + global_[None, :]


def backward_and_step(params, caches, grad_predictions, learning_rate):
    """
    Accumulate gradients over one or more cached forward passes and take a
    plain gradient-descent step. Returns (new params, summed gradients).
    """
    if isinstance(caches, dict):
        caches, grad_predictions = [caches], [grad_predictions]
    total = {name: np.zeros_like(value) for name, value in params.tensors.items()}
    for cache, grad_prediction in zip(caches, grad_predictions):
        for name, grad in gmp_backward(cache, grad_prediction, params).items():
            total[name] += grad
    return params.step(total, learning_rate), total


class GmpUpdater:
    """
    Batched ordinary-agent updater bound to one interaction graph and fixed
    profile embeddings; the static projection is computed once.
    """

    def __init__(self, params, graph, profile_embeddings):
        self.params = params
        self.graph = graph
        self.edges = graph.edge_index()
        self.static_cache = project_static(profile_embeddings, params)

    def predict(self, history):
        features = dynamic_features(history, self.graph)
        prediction, _ = gmp_forward(features.phi_d, None, self.edges, self.params, self.static_cache)
        return prediction

    def step(self, history, overrides=None):
        column = self.predict(history)
        if overrides:
            ids = np.fromiter(overrides.keys(), dtype=np.int64)
            column[ids] = clamp_opinion(np.fromiter(overrides.values(), dtype=np.float64))
        return column

    def rollout(self, history, steps, core_overrides=None):
        history = np.asarray(history, dtype=np.float64)
        if history.ndim != 2 or history.shape[1] < 1:
            raise ValueError("rollout needs at least one committed step")
        for offset in range(steps):
            overrides = (core_overrides or {}).get(offset)
            history = np.hstack([history, self.step(history, overrides)[:, None]])
            logging.debug(f"GMP rollout step {offset + 1}/{steps}")
        return history


def rollout(params, history, graph, steps, profile_embeddings, core_overrides=None):
    """
    Recursive prediction: each new column feeds the next step's features.
    `core_overrides` maps a step offset to {agent_id: opinion}.
    """
    return GmpUpdater(params, graph, profile_embeddings).rollout(history, steps, core_overrides)
