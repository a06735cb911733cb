// Copyright 2026 spoofbench authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "spoofbench/nn/autograd.hpp"
#include "spoofbench/nn/conv_ops.hpp"
#include "spoofbench/nn/layers.hpp"
#include "spoofbench/nn/optim.hpp"

using namespace spoofbench;
using nn::Var;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

// Central-difference check of d(loss)/d(param) for every checked parameter.
// make_loss must rebuild the graph from the params' current values.
void check_grads(const std::function<Var()>& make_loss, std::vector<Var> params,
                 float eps = 1e-2f, float tol = 2e-2f) {
  for (Var& p : params) p.zero_grad();
  Var loss = make_loss();
  REQUIRE(loss.numel() == 1);
  nn::backward(loss);

  for (Var& p : params) {
    REQUIRE(p.grad().defined());
    Tensor analytic = p.grad().clone();
    for (int64_t i = 0; i < p.numel(); ++i) {
      float* slot = p.value().data() + i;
      const float saved = *slot;
      *slot = saved + eps;
      double up, down;
      {
        nn::NoGradGuard ng;
        up = make_loss().value().data()[0];
        *slot = saved - eps;
        down = make_loss().value().data()[0];
      }
      *slot = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.data()[i];
      const double denom = std::max({1e-3, std::abs(a), std::abs(numeric)});
      INFO("param " << p.name() << " index " << i << " analytic " << a << " numeric " << numeric);
      REQUIRE(std::abs(a - numeric) / denom < tol);
    }
  }
}

}  // namespace

TEST_CASE("backward accumulates over shared subexpressions") {
  Var x = nn::make_param(Tensor::from({1}, {3.0f}), "x");
  Var y = nn::add(x, x);             // 2x
  Var z = nn::mul(y, x);             // 2x^2
  nn::backward(nn::mean_all(z));
  REQUIRE(z.value().data()[0] == Catch::Approx(18.0f));
  REQUIRE(x.grad().data()[0] == Catch::Approx(12.0f));  // d(2x^2)/dx = 4x
}

TEST_CASE("no-grad guard suspends recording") {
  Var x = nn::make_param(Tensor::from({2}, {1.0f, 2.0f}), "x");
  {
    nn::NoGradGuard ng;
    Var y = nn::scale(x, 2.0f);
    REQUIRE_FALSE(y.requires_grad());
  }
  Var y = nn::scale(x, 2.0f);
  REQUIRE(y.requires_grad());
}

TEST_CASE("elementwise op gradients") {
  Rng rng(7);
  Var a = nn::make_param(random_tensor({3, 4}, rng), "a");
  Var b = nn::make_param(random_tensor({3, 4}, rng), "b");
  Tensor mix = random_tensor({3, 4}, rng);

  auto loss_of = [&](const std::function<Var()>& body) {
    return [body, mix]() { return nn::mean_all(nn::mul(body(), nn::make_const(mix))); };
  };

  check_grads(loss_of([&] { return nn::add(a, b); }), {a, b});
  check_grads(loss_of([&] { return nn::sub(a, b); }), {a, b});
  check_grads(loss_of([&] { return nn::mul(a, b); }), {a, b});
  check_grads(loss_of([&] { return nn::scale(a, -1.7f); }), {a});
  check_grads(loss_of([&] { return nn::sigmoid(a); }), {a});
  check_grads(loss_of([&] { return nn::tanh_op(a); }), {a});
  check_grads(loss_of([&] { return nn::gelu(a); }), {a});
}

TEST_CASE("relu gradient away from the kink") {
  Rng rng(11);
  Tensor t = Tensor::zeros({4, 5});
  for (int64_t i = 0; i < t.numel(); ++i) {
    double v = rng.uniform(0.2, 1.0);
    t.data()[i] = static_cast<float>(rng.uniform() < 0.5 ? -v : v);
  }
  Var a = nn::make_param(t, "a");
  Tensor mix = random_tensor({4, 5}, rng);
  check_grads([&] { return nn::mean_all(nn::mul(nn::relu(a), nn::make_const(mix))); }, {a});
}

TEST_CASE("mfm picks the channelwise max and routes gradient to the winner") {
  // [[1],[3]] over two channels -> [[3]].
  Var x = nn::make_param(Tensor::from({1, 2, 1, 1}, {1.0f, 3.0f}), "x");
  Var y = nn::mfm(x);
  REQUIRE(y.shape() == Shape{1, 1, 1, 1});
  REQUIRE(y.value().data()[0] == 3.0f);
  nn::backward(nn::mean_all(y));
  REQUIRE(x.grad().data()[0] == 0.0f);
  REQUIRE(x.grad().data()[1] == 1.0f);

  Rng rng(13);
  // Build pairs whose halves differ by at least 0.2 so the argmax cannot
  // flip under the finite-difference perturbation.
  Tensor t = Tensor::zeros({2, 6, 3, 2});
  const int64_t half = 3 * 3 * 2;
  for (int64_t b = 0; b < 2; ++b)
    for (int64_t k = 0; k < half; ++k) {
      const float base = static_cast<float>(rng.uniform(-1.0, 1.0));
      const float delta = static_cast<float>(rng.uniform(0.2, 0.8));
      const bool first_wins = rng.uniform() < 0.5;
      t.data()[b * 2 * half + k] = first_wins ? base + delta : base;
      t.data()[b * 2 * half + half + k] = first_wins ? base : base + delta;
    }
  Var a = nn::make_param(t, "a");
  Tensor mix = random_tensor({2, 3, 3, 2}, rng);
  check_grads([&] { return nn::mean_all(nn::mul(nn::mfm(a), nn::make_const(mix))); }, {a});
}

TEST_CASE("shape op gradients") {
  Rng rng(17);
  Var a = nn::make_param(random_tensor({2, 3, 4}, rng), "a");
  Tensor mix_t12 = random_tensor({2, 4, 3}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::transpose_12(a), nn::make_const(mix_t12))); }, {a});

  Tensor mix_flat = random_tensor({24}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::reshape(a, {24}), nn::make_const(mix_flat))); }, {a});

  Var b = nn::make_param(random_tensor({2, 3, 4, 5}, rng), "b");
  Tensor mix_perm = random_tensor({2, 4, 3, 5}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::permute_0213(b), nn::make_const(mix_perm))); }, {b});

  Var m = nn::make_param(random_tensor({4, 6}, rng), "m");
  Tensor mix_slice = random_tensor({4, 3}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::slice_cols(m, 2, 3), nn::make_const(mix_slice))); },
      {m});

  Var c1 = nn::make_param(random_tensor({3, 2}, rng), "c1");
  Var c2 = nn::make_param(random_tensor({3, 4}, rng), "c2");
  Tensor mix_cat = random_tensor({3, 6}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::concat_cols(c1, c2), nn::make_const(mix_cat))); },
      {c1, c2});

  Var seq = nn::make_param(random_tensor({2, 5, 3}, rng), "seq");
  Tensor mix_tok = random_tensor({2, 3}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::select_token(seq, 3), nn::make_const(mix_tok))); },
      {seq});

  Var tok = nn::make_param(random_tensor({3}, rng), "tok");
  Tensor mix_pre = random_tensor({2, 6, 3}, rng);
  check_grads(
      [&] {
        return nn::mean_all(nn::mul(nn::prepend_token(seq, tok), nn::make_const(mix_pre)));
      },
      {seq, tok});

  Var pos = nn::make_param(random_tensor({5, 3}, rng), "pos");
  Tensor mix_pos = random_tensor({2, 5, 3}, rng);
  check_grads(
      [&] {
        return nn::mean_all(nn::mul(nn::add_positional(seq, pos), nn::make_const(mix_pos)));
      },
      {seq, pos});
}

TEST_CASE("linear matches a hand computation and its gradients check out") {
  Var x = nn::make_param(Tensor::from({1, 2}, {1.0f, 2.0f}), "x");
  Var w = nn::make_param(Tensor::from({2, 2}, {1.0f, 0.0f, 3.0f, -1.0f}), "w");
  Var b = nn::make_param(Tensor::from({2}, {0.5f, -0.5f}), "b");
  Var y = nn::linear(x, w, b);
  REQUIRE(y.value().data()[0] == Catch::Approx(1.5f));   // 1*1 + 2*0 + 0.5
  REQUIRE(y.value().data()[1] == Catch::Approx(0.5f));   // 1*3 - 2*1 - 0.5

  Rng rng(19);
  Var x2 = nn::make_param(random_tensor({4, 5}, rng), "x2");
  Var w2 = nn::make_param(random_tensor({3, 5}, rng), "w2");
  Var b2 = nn::make_param(random_tensor({3}, rng), "b2");
  Tensor mix = random_tensor({4, 3}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::linear(x2, w2, b2), nn::make_const(mix))); },
      {x2, w2, b2});
}

TEST_CASE("bmm gradients for every transpose combination") {
  Rng rng(23);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      const int64_t m = 3, k = 4, n = 2, batch = 2;
      Shape sa = ta ? Shape{batch, k, m} : Shape{batch, m, k};
      Shape sb = tb ? Shape{batch, n, k} : Shape{batch, k, n};
      Var a = nn::make_param(random_tensor(sa, rng), "a");
      Var b = nn::make_param(random_tensor(sb, rng), "b");
      Tensor mix = random_tensor({batch, m, n}, rng);
      INFO("trans_a " << ta << " trans_b " << tb);
      check_grads(
          [&] { return nn::mean_all(nn::mul(nn::bmm(a, b, ta, tb), nn::make_const(mix))); },
          {a, b});
    }
}

TEST_CASE("bmm agrees with linear on a plain product") {
  Rng rng(29);
  Tensor xa = random_tensor({1, 3, 4}, rng);
  Tensor xb = random_tensor({1, 4, 2}, rng);
  Var ya = nn::bmm(nn::make_const(xa), nn::make_const(xb));
  // Same product via linear: w must be [out,in] = xb^T.
  Tensor wt = Tensor::zeros({2, 4});
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 2; ++j) wt.data()[j * 4 + i] = xb.data()[i * 2 + j];
  Var yb = nn::linear(nn::make_const(xa.reshaped({3, 4})), nn::make_const(wt));
  for (int64_t i = 0; i < 6; ++i)
    REQUIRE(ya.value().data()[i] == Catch::Approx(yb.value().data()[i]).margin(1e-5));
}

TEST_CASE("reduction gradients") {
  Rng rng(31);
  Var a = nn::make_param(random_tensor({2, 3, 2, 4}, rng), "a");
  Tensor mix_bc = random_tensor({2, 3}, rng);
  check_grads([&] { return nn::mean_all(nn::mul(nn::mean_hw(a), nn::make_const(mix_bc))); }, {a});
  Tensor mix_bcw = random_tensor({2, 3, 4}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::mean_height(a), nn::make_const(mix_bcw))); }, {a});
  check_grads([&] { return nn::mean_all(a); }, {a});
}

TEST_CASE("softmax rows: simplex output and correct gradient") {
  Rng rng(37);
  Var a = nn::make_param(random_tensor({4, 5}, rng, -3.0, 3.0), "a");
  Var y = nn::softmax_rows(a);
  for (int64_t i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < 5; ++j) {
      const float v = y.value().data()[i * 5 + j];
      REQUIRE(v >= 0.0f);
      sum += v;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-5));
  }
  Tensor mix = random_tensor({4, 5}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::softmax_rows(a), nn::make_const(mix))); }, {a});
}

TEST_CASE("layer norm: normalized output and gradients") {
  Rng rng(41);
  Var x = nn::make_param(random_tensor({3, 6}, rng, -2.0, 2.0), "x");
  Var gamma = nn::make_param(random_tensor({6}, rng, 0.5, 1.5), "gamma");
  Var beta = nn::make_param(random_tensor({6}, rng), "beta");
  {
    Var ones = nn::make_param(Tensor::full({6}, 1.0f), "ones");
    Var zeros = nn::make_param(Tensor::zeros({6}), "zeros");
    Var y = nn::layer_norm(x, ones, zeros);
    for (int64_t i = 0; i < 3; ++i) {
      double mean = 0.0, var = 0.0;
      for (int64_t j = 0; j < 6; ++j) mean += y.value().data()[i * 6 + j];
      mean /= 6.0;
      for (int64_t j = 0; j < 6; ++j) {
        const double c = y.value().data()[i * 6 + j] - mean;
        var += c * c;
      }
      REQUIRE(mean == Catch::Approx(0.0).margin(1e-5));
      REQUIRE(var / 6.0 == Catch::Approx(1.0).margin(1e-3));
    }
  }
  Tensor mix = random_tensor({3, 6}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::layer_norm(x, gamma, beta), nn::make_const(mix))); },
      {x, gamma, beta});
}

TEST_CASE("batch norm: train-mode statistics and gradients") {
  Rng rng(43);
  Var x = nn::make_param(random_tensor({3, 2, 2, 2}, rng, -2.0, 2.0), "x");
  Var gamma = nn::make_param(random_tensor({2}, rng, 0.5, 1.5), "gamma");
  Var beta = nn::make_param(random_tensor({2}, rng), "beta");

  Tensor bm, bv;
  Var y = nn::batch_norm2d_train(x, gamma, beta, &bm, &bv);
  // Per channel, gamma=g beta=b: output mean is b, variance g^2 (biased).
  for (int64_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (int64_t b = 0; b < 3; ++b)
      for (int64_t k = 0; k < 4; ++k) mean += y.value().data()[(b * 2 + c) * 4 + k];
    mean /= 12.0;
    REQUIRE(mean == Catch::Approx(beta.value().data()[c]).margin(1e-4));
  }
  REQUIRE(bm.numel() == 2);
  REQUIRE(bv.numel() == 2);

  Tensor mix = random_tensor({3, 2, 2, 2}, rng);
  check_grads(
      [&] {
        return nn::mean_all(
            nn::mul(nn::batch_norm2d_train(x, gamma, beta, nullptr, nullptr),
                    nn::make_const(mix)));
      },
      {x, gamma, beta});

  Tensor rm = random_tensor({2}, rng);
  Tensor rv = random_tensor({2}, rng, 0.5, 2.0);
  check_grads(
      [&] {
        return nn::mean_all(
            nn::mul(nn::batch_norm2d_eval(x, gamma, beta, rm, rv), nn::make_const(mix)));
      },
      {x, gamma, beta});
}

TEST_CASE("cross entropy: uniform logits give ln 2 and gradients check out") {
  Var logits = nn::make_param(Tensor::zeros({3, 2}), "logits");
  Var loss = nn::cross_entropy_loss(logits, {0, 1, 0});
  REQUIRE(loss.value().data()[0] == Catch::Approx(std::log(2.0)).epsilon(1e-6));

  Rng rng(47);
  Var l2 = nn::make_param(random_tensor({5, 3}, rng, -2.0, 2.0), "l2");
  std::vector<int> labels = {0, 2, 1, 1, 0};
  check_grads([&] { return nn::cross_entropy_loss(l2, labels); }, {l2}, 1e-2f, 2e-2f);
}

TEST_CASE("bce with logits: zero logit gives ln 2, weights scale per class") {
  Var logit = nn::make_param(Tensor::zeros({1, 1}), "logit");
  Var loss = nn::bce_logits_loss(logit, {1});
  REQUIRE(loss.value().data()[0] == Catch::Approx(std::log(2.0)).epsilon(1e-6));

  // Doubling the fake-class weight doubles a pure-fake batch loss.
  Var l1 = nn::make_param(Tensor::from({2, 1}, {0.3f, -0.7f}), "l1");
  Var plain = nn::bce_logits_loss(l1, {1, 1}, 1.0, 1.0);
  Var heavy = nn::bce_logits_loss(l1, {1, 1}, 1.0, 2.0);
  REQUIRE(heavy.value().data()[0] == Catch::Approx(2.0f * plain.value().data()[0]).epsilon(1e-5));

  Rng rng(53);
  Var l3 = nn::make_param(random_tensor({6, 1}, rng, -2.0, 2.0), "l3");
  std::vector<int> labels = {0, 1, 1, 0, 1, 0};
  check_grads([&] { return nn::bce_logits_loss(l3, labels, 0.8, 1.9); }, {l3}, 1e-2f, 2e-2f);
}

TEST_CASE("conv2d: identity kernel, hand values, gradients") {
  // 1x1 kernel with weight 2 doubles the input.
  Var x = nn::make_param(Tensor::from({1, 1, 2, 2}, {1.0f, 2.0f, 3.0f, 4.0f}), "x");
  Var w = nn::make_param(Tensor::from({1, 1, 1, 1}, {2.0f}), "w");
  Var y = nn::conv2d(x, w);
  for (int64_t i = 0; i < 4; ++i)
    REQUIRE(y.value().data()[i] == Catch::Approx(2.0f * x.value().data()[i]));

  Rng rng(59);
  Var x2 = nn::make_param(random_tensor({2, 3, 5, 6}, rng), "x2");
  Var w2 = nn::make_param(random_tensor({4, 3, 3, 3}, rng), "w2");
  Var b2 = nn::make_param(random_tensor({4}, rng), "b2");
  Var probe = nn::conv2d(x2, w2, b2, 2, 1);
  REQUIRE(probe.shape() == Shape{2, 4, 3, 3});
  Tensor mix = random_tensor({2, 4, 3, 3}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::conv2d(x2, w2, b2, 2, 1), nn::make_const(mix))); },
      {x2, w2, b2});
}

TEST_CASE("conv1d gradients and time-only padding") {
  Rng rng(61);
  Var x = nn::make_param(random_tensor({2, 3, 9}, rng), "x");
  Var w = nn::make_param(random_tensor({4, 3, 3}, rng), "w");
  Var b = nn::make_param(random_tensor({4}, rng), "b");
  Var probe = nn::conv1d(x, w, b, 2, 1);
  REQUIRE(probe.shape() == Shape{2, 4, 5});
  Tensor mix = random_tensor({2, 4, 5}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::conv1d(x, w, b, 2, 1), nn::make_const(mix))); },
      {x, w, b});
}

TEST_CASE("maxpool2d: values, padding exclusion, gradients") {
  Var x = nn::make_param(
      Tensor::from({1, 1, 2, 4}, {1.0f, 5.0f, 2.0f, 0.0f, 3.0f, -1.0f, 4.0f, 2.0f}), "x");
  Var y = nn::maxpool2d(x, 2, 2);
  REQUIRE(y.shape() == Shape{1, 1, 1, 2});
  REQUIRE(y.value().data()[0] == 5.0f);
  REQUIRE(y.value().data()[1] == 4.0f);

  // All-negative input with padding: padded cells must not win.
  Var neg = nn::make_param(Tensor::full({1, 1, 2, 2}, -3.0f), "neg");
  Var yp = nn::maxpool2d(neg, 3, 2, 1);
  REQUIRE(yp.value().data()[0] == -3.0f);

  Rng rng(67);
  Tensor t = random_tensor({2, 2, 6, 6}, rng);
  // Spread the values so argmax does not flip under perturbation.
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] *= 10.0f;
  Var x2 = nn::make_param(t, "x2");
  Tensor mix = random_tensor({2, 2, 3, 3}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(nn::maxpool2d(x2, 3, 2, 1), nn::make_const(mix))); },
      {x2});
}

TEST_CASE("multi-head attention and transformer block gradients") {
  Rng rng(71);
  nn::ParamRegistry reg(123);
  nn::MultiHeadSelfAttention attn(reg, "attn", 8, 2);
  Var x = nn::make_param(random_tensor({2, 3, 8}, rng), "x");
  Tensor mix = random_tensor({2, 3, 8}, rng);
  std::vector<Var> checked = {x, attn.q.w, attn.k.w, attn.v.w, attn.out.w, attn.out.b};
  check_grads(
      [&] { return nn::mean_all(nn::mul(attn.forward(x), nn::make_const(mix))); }, checked);

  nn::ParamRegistry reg2(321);
  nn::TransformerBlock blk(reg2, "blk", 8, 2, 16);
  std::vector<Var> checked2 = {x, blk.fc1.w, blk.ln1.gamma, blk.attn.q.w};
  check_grads(
      [&] { return nn::mean_all(nn::mul(blk.forward(x), nn::make_const(mix))); }, checked2);
}

TEST_CASE("lstm and bilstm gradients over a short sequence") {
  Rng rng(73);
  nn::ParamRegistry reg(55);
  nn::BiLstm lstm(reg, "lstm", 3, 4);
  std::vector<Var> steps;
  for (int i = 0; i < 3; ++i)
    steps.push_back(nn::make_param(random_tensor({2, 3}, rng), "step" + std::to_string(i)));
  Tensor mix = random_tensor({2, 8}, rng);
  std::vector<Var> checked = {steps[0], steps[2], lstm.fwd.w_ih, lstm.fwd.w_hh, lstm.fwd.bias,
                              lstm.bwd.w_ih};
  check_grads([&] { return nn::mean_all(nn::mul(lstm.run(steps), nn::make_const(mix))); },
              checked);

  // Final state of the forward cell must depend on the last step only through
  // the recurrence; a one-step sequence equals a plain cell application.
  nn::LstmCell cell(reg, "cell", 3, 4);
  Var h1 = cell.run({steps[0]});
  REQUIRE(h1.shape() == Shape{2, 4});
}

TEST_CASE("additive attention: weights on the simplex, gradients") {
  Rng rng(79);
  nn::ParamRegistry reg(77);
  nn::AdditiveAttention attn(reg, "attn", 5, 4);
  Var h = nn::make_param(random_tensor({3, 6, 5}, rng), "h");
  auto res = attn.forward(h);
  REQUIRE(res.context.shape() == Shape{3, 5});
  REQUIRE(res.weights.shape() == Shape{3, 6});
  for (int64_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < 6; ++j) sum += res.weights.value().data()[i * 6 + j];
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-5));
  }
  Tensor mix = random_tensor({3, 5}, rng);
  check_grads(
      [&] { return nn::mean_all(nn::mul(attn.forward(h).context, nn::make_const(mix))); },
      {h, attn.w, attn.b, attn.v});
}

TEST_CASE("parameter registry: deterministic, order-free init, unique names") {
  nn::ParamRegistry a(99), b(99);
  Var w1 = a.param("w", {4, 4}, nn::Init::kXavier);
  Var u1 = a.param("u", {4}, nn::Init::kNormal, 0.0, 1.0);
  // Same names created in the opposite order produce identical values.
  Var u2 = b.param("u", {4}, nn::Init::kNormal, 0.0, 1.0);
  Var w2 = b.param("w", {4, 4}, nn::Init::kXavier);
  for (int64_t i = 0; i < 16; ++i)
    REQUIRE(w1.value().data()[i] == w2.value().data()[i]);
  for (int64_t i = 0; i < 4; ++i)
    REQUIRE(u1.value().data()[i] == u2.value().data()[i]);
  REQUIRE_THROWS_AS(a.param("w", {1}, nn::Init::kZeros), Error);

  nn::ParamRegistry c(100);
  Var w3 = c.param("w", {4, 4}, nn::Init::kXavier);
  bool any_diff = false;
  for (int64_t i = 0; i < 16; ++i) any_diff |= w1.value().data()[i] != w3.value().data()[i];
  REQUIRE(any_diff);
}

TEST_CASE("adam takes the expected first step") {
  // With a fresh state, the first Adam step moves each coordinate by
  // lr * g / (|g| + eps), independent of the gradient magnitude.
  Var p = nn::make_param(Tensor::from({2}, {1.0f, -2.0f}), "p");
  nn::OptimConfig cfg;
  cfg.kind = nn::OptimKind::kAdam;
  cfg.lr = 0.1;
  nn::Optimizer opt({p}, cfg);
  Var loss = nn::mean_all(nn::mul(p, nn::make_const(Tensor::from({2}, {2.0f, -6.0f}))));
  opt.zero_grad();
  nn::backward(loss);
  opt.step();
  REQUIRE(p.value().data()[0] == Catch::Approx(1.0f - 0.1f).epsilon(1e-4));
  REQUIRE(p.value().data()[1] == Catch::Approx(-2.0f + 0.1f).epsilon(1e-4));
}

TEST_CASE("adamw decays weights, adam does not") {
  auto run = [](nn::OptimKind kind) {
    Var p = nn::make_param(Tensor::from({1}, {10.0f}), "p");
    nn::OptimConfig cfg;
    cfg.kind = kind;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.5;
    nn::Optimizer opt({p}, cfg);
    // Zero-gradient step: pure decay for AdamW, no move for Adam.
    Var loss = nn::mean_all(nn::scale(p, 0.0f));
    opt.zero_grad();
    nn::backward(loss);
    opt.step();
    return p.value().data()[0];
  };
  REQUIRE(run(nn::OptimKind::kAdam) == Catch::Approx(10.0f).margin(1e-6));
  REQUIRE(run(nn::OptimKind::kAdamW) == Catch::Approx(10.0f - 0.01f * 0.5f * 10.0f).margin(1e-4));
}

TEST_CASE("optimizer skips frozen parameters entirely") {
  Var trainable = nn::make_param(Tensor::from({1}, {1.0f}), "t");
  Var frozen = nn::make_param(Tensor::from({1}, {5.0f}), "f");
  frozen.set_requires_grad(false);
  nn::OptimConfig cfg;
  cfg.lr = 0.1;
  nn::Optimizer opt({trainable, frozen}, cfg);
  REQUIRE(opt.params().size() == 1);
  Var loss = nn::mean_all(nn::scale(trainable, 3.0f));
  opt.zero_grad();
  nn::backward(loss);
  opt.step();
  REQUIRE(frozen.value().data()[0] == 5.0f);
  REQUIRE(trainable.value().data()[0] != 1.0f);
}

TEST_CASE("gradient descent drives a tiny network onto a linear rule") {
  Rng rng(83);
  nn::ParamRegistry reg(7);
  nn::LinearLayer fc1(reg, "fc1", 2, 8);
  nn::LinearLayer fc2(reg, "fc2", 8, 2);
  std::vector<Var> params;
  for (const auto& [name, v] : reg.params()) params.push_back(v);
  nn::OptimConfig cfg;
  cfg.lr = 0.05;
  nn::Optimizer opt(params, cfg);

  Tensor x = Tensor::zeros({32, 2});
  std::vector<int> labels(32);
  for (int64_t i = 0; i < 32; ++i) {
    x.data()[i * 2] = static_cast<float>(rng.uniform(-1.0, 1.0));
    x.data()[i * 2 + 1] = static_cast<float>(rng.uniform(-1.0, 1.0));
    labels[static_cast<size_t>(i)] = x.data()[i * 2] + x.data()[i * 2 + 1] > 0 ? 1 : 0;
  }
  double first_loss = 0.0, last_loss = 0.0;
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    Var logits = fc2.forward(nn::relu(fc1.forward(nn::make_const(x))));
    Var loss = nn::cross_entropy_loss(logits, labels);
    if (step == 0) first_loss = loss.value().data()[0];
    last_loss = loss.value().data()[0];
    nn::backward(loss);
    opt.step();
  }
  REQUIRE(last_loss < 0.1);
  REQUIRE(last_loss < first_loss / 5.0);
}
