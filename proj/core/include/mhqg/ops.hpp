#pragma once

#include <cstddef>
#include <vector>

#include "mhqg/tape.hpp"

namespace mhqg::num {

// Differentiable op library over Tape/Var. Shapes are checked on every call;
// mismatches throw ShapeError naming both shapes. Broadcasting is limited to
// bias-vector addition along the last axis (see add()). Everything else is
// explicit: row scaling, scalar scaling and gather/scatter are their own ops.

Var constant(Tape& tape, Tensor value);

// matmul supports (m,k)x(k,n)->(m,n), (m,k)x(k,)->(m,) and (k,)x(k,n)->(n,).
Var matmul(Var a, Var b);
Var transpose(Var a);

// add/sub: identical shapes, plus (m,n)+(n,) bias broadcast for add.
Var add(Var a, Var b);
Var sub(Var a, Var b);

// Elementwise product, identical shapes.
Var mul(Var a, Var b);

// out[i,:] = m[i,:] * v[i]
Var scale_rows(Var m, Var v);

// Multiply by a scalar Var (shape {1}).
Var scale(Var a, Var s);

// Multiply by a compile-time constant.
Var scale_const(Var a, double c);
inline Var neg(Var a) { return scale_const(a, -1.0); }

// Size-preserving reinterpretation, e.g. (1,d) row as (d,) vector.
Var reshape(Var a, std::vector<std::size_t> shape);

// Concatenate along axis 0 or 1. 1-d tensors concatenate along axis 0.
Var concat(const std::vector<Var>& parts, std::size_t axis);

// Stack k vectors of shape (d,) into a (k,d) matrix.
Var stack_rows(const std::vector<Var>& rows);

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t len);

// Single element of a 1-d tensor, as a scalar.
Var pick(Var a, std::size_t index);

// Gather rows of a (n,d) matrix; indices may repeat.
Var rows(Var a, std::vector<std::size_t> indices);

// Row lookup in an embedding table; identical to rows().
inline Var embedding_lookup(Var table, std::vector<std::size_t> ids) {
  return rows(table, std::move(ids));
}

// out = zeros(out_rows, ...); out[indices[i]] += src[i]. src is (k,d) or (k,).
Var scatter_add(Var src, std::vector<std::size_t> indices, std::size_t out_rows);

Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var log(Var a);

// Softmax along the given axis; each slice sums to 1.
Var softmax(Var a, std::size_t axis);

// Mean along the given axis; reduces that axis.
Var mean(Var a, std::size_t axis);

Var sum_all(Var a);

}  // namespace mhqg::num
