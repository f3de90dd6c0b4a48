"""Builds the tiny ONNX classifiers used by the graph-runtime backend tests.

Each axis gets a bag-of-embeddings model (mean-pooled embeddings followed by a
linear head) over a small word-level vocabulary. Reference logits are computed
with numpy and written to parity.jsonl in the {text, axis, logits} format.

Run from this directory:  python3 generate.py
"""

import json

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper
from tokenizers import Tokenizer, models, normalizers, pre_tokenizers

VOCAB = [
    "[UNK]", "[PAD]", "we", "the", "our", "to", "of", "and", "by", "in",
    "risk", "risks", "stranded", "physical", "flood", "opportunity",
    "opportunities", "growth", "revenue", "green", "commit", "commitment",
    "pledge", "will", "target", "targets", "2030", "2040", "2050", "percent",
    "net", "zero", "reduce", "reduction", "emissions", "scope", "weather",
    "was", "pleasant", "climate", "strategy", "general", "values",
]
HIDDEN = 4
MAX_LEN = 16

AXES = {
    "sentiment": ["opportunity", "neutral", "risk"],
    "commitment": ["no", "yes"],
    "specificity": ["non-specific", "specific"],
    "target": ["NONE", "NETZERO", "REDUCTION"],
}

# Words that push each axis toward a given label index (in model label order).
CUES = {
    "sentiment": {
        "risk": 2, "risks": 2, "stranded": 2, "physical": 2, "flood": 2,
        "opportunity": 0, "opportunities": 0, "growth": 0, "revenue": 0,
        "green": 0,
    },
    "commitment": {"commit": 1, "commitment": 1, "pledge": 1, "will": 1},
    "specificity": {
        "2030": 1, "2040": 1, "2050": 1, "percent": 1, "scope": 1,
        "target": 1, "targets": 1,
    },
    "target": {
        "net": 1, "zero": 1, "reduce": 2, "reduction": 2, "percent": 2,
    },
}

SAMPLES = [
    "We face physical risk from flood events",
    "Stranded assets are a risk to our strategy",
    "Green revenue growth is an opportunity",
    "We commit to net zero by 2050",
    "We pledge to reduce scope emissions 30 percent by 2030",
    "The weather was pleasant",
    "Our climate strategy reflects general values",
    "We will reduce emissions and reach net zero by 2040",
    "Opportunities in green growth and climate risk",
    "Our targets include a reduction of scope emissions",
]


def build_tokenizer():
    vocab = {w: i for i, w in enumerate(VOCAB)}
    tok = Tokenizer(models.WordLevel(vocab=vocab, unk_token="[UNK]"))
    tok.normalizer = normalizers.Lowercase()
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return tok


def axis_weights(axis, seed):
    rng = np.random.default_rng(seed)
    n_labels = len(AXES[axis])
    emb = rng.normal(0.0, 0.05, size=(len(VOCAB), HIDDEN)).astype(np.float32)
    head = np.zeros((HIDDEN, n_labels), dtype=np.float32)
    for label in range(n_labels):
        head[label % HIDDEN, label] = 3.0
    bias = np.zeros(n_labels, dtype=np.float32)
    # default label: neutral for sentiment, first label elsewhere
    default = 1 if axis == "sentiment" else 0
    bias[default] = 0.5
    for word, label in CUES[axis].items():
        emb[VOCAB.index(word), label % HIDDEN] += 2.0
    return emb, head, bias


def build_model(axis, emb, head, bias):
    ids = helper.make_tensor_value_info("input_ids", TensorProto.INT64, ["batch", "seq"])
    mask = helper.make_tensor_value_info("attention_mask", TensorProto.INT64, ["batch", "seq"])
    out = helper.make_tensor_value_info("logits", TensorProto.FLOAT, ["batch", len(AXES[axis])])
    inits = [
        numpy_helper.from_array(emb, "embedding"),
        numpy_helper.from_array(head, "head"),
        numpy_helper.from_array(bias, "bias"),
        numpy_helper.from_array(np.array([2], dtype=np.int64), "last_axis"),
        numpy_helper.from_array(np.array([1], dtype=np.int64), "seq_axis"),
    ]
    nodes = [
        helper.make_node("Gather", ["embedding", "input_ids"], ["tok_emb"], axis=0),
        helper.make_node("Cast", ["attention_mask"], ["mask_f"], to=TensorProto.FLOAT),
        helper.make_node("Unsqueeze", ["mask_f", "last_axis"], ["mask_3d"]),
        helper.make_node("Mul", ["tok_emb", "mask_3d"], ["masked"]),
        helper.make_node("ReduceSum", ["masked", "seq_axis"], ["summed"], keepdims=0),
        helper.make_node("ReduceSum", ["mask_3d", "seq_axis"], ["count"], keepdims=0),
        helper.make_node("Div", ["summed", "count"], ["pooled"]),
        helper.make_node("MatMul", ["pooled", "head"], ["proj"]),
        helper.make_node("Add", ["proj", "bias"], ["logits"]),
    ]
    graph = helper.make_graph(nodes, f"{axis}_classifier", [ids, mask], [out], inits)
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
    model.ir_version = 8
    onnx.checker.check_model(model)
    return model


def reference_logits(tok, text, emb, head, bias):
    ids = tok.encode(text).ids[:MAX_LEN]
    pooled = emb[ids].mean(axis=0)
    return (pooled @ head + bias).astype(np.float32)


def main():
    tok = build_tokenizer()
    tok.save("tokenizer.json")
    parity = []
    for i, axis in enumerate(AXES):
        emb, head, bias = axis_weights(axis, seed=100 + i)
        onnx.save(build_model(axis, emb, head, bias), f"{axis}.onnx")
        meta = {
            "axis": axis,
            "labels": AXES[axis],
            "max_sequence_length": MAX_LEN,
            "tokenizer": "tokenizer.json",
        }
        with open(f"{axis}.json", "w") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
        for text in SAMPLES:
            logits = reference_logits(tok, text, emb, head, bias)
            parity.append({"text": text, "axis": axis, "logits": [float(x) for x in logits]})
    with open("parity.jsonl", "w") as fh:
        for row in parity:
            fh.write(json.dumps(row) + "\n")


if __name__ == "__main__":
    main()
