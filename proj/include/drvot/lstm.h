#ifndef DRVOT_LSTM_H
#define DRVOT_LSTM_H

#include <Eigen/Dense>

namespace drvot {

/// One directional gated recurrent (long short-term memory) cell.
/// Gate order in the stacked 4h rows: input, forget, candidate, output.
struct LstmParams {
  Eigen::MatrixXd w_input;  // 4h x in
  Eigen::MatrixXd w_recur;  // 4h x h
  Eigen::VectorXd bias;     // 4h

  int hidden() const { return static_cast<int>(w_recur.cols()); }
  int input() const { return static_cast<int>(w_input.cols()); }
};

/// Activations cached by the forward pass; backward consumes them.
struct LstmTrace {
  Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;  // T x h
  Eigen::MatrixXd cell, cell_tanh, hidden;         // T x h
};

/// Runs the cell over the rows of `input` (T x in) in natural order with
/// zero initial state. Returns hidden states in `trace.hidden` (T x h).
void lstm_forward(const LstmParams& p, const Eigen::MatrixXd& input,
                  LstmTrace& trace);

/// Backpropagates `d_hidden` (T x h, gradient w.r.t. trace.hidden rows),
/// accumulating parameter gradients into `grads` (same shapes as params,
/// caller-zeroed) and returning the gradient w.r.t. `input`.
Eigen::MatrixXd lstm_backward(const LstmParams& p, const Eigen::MatrixXd& input,
                              const LstmTrace& trace,
                              const Eigen::MatrixXd& d_hidden, LstmParams& grads);

/// A bidirectional layer: `fwd` reads the sequence in natural order, `bwd`
/// reversed; per-frame outputs are the concatenation [fwd | bwd] (T x 2h).
struct BiLstmLayer {
  LstmParams fwd;
  LstmParams bwd;
};

struct BiLstmTrace {
  LstmTrace fwd;
  LstmTrace bwd;  // stored in the reversed time order it was run in
  Eigen::MatrixXd output;  // T x 2h, natural order
};

void bilstm_forward(const BiLstmLayer& layer, const Eigen::MatrixXd& input,
                    BiLstmTrace& trace);

Eigen::MatrixXd bilstm_backward(const BiLstmLayer& layer,
                                const Eigen::MatrixXd& input,
                                const BiLstmTrace& trace,
                                const Eigen::MatrixXd& d_output,
                                BiLstmLayer& grads);

}  // namespace drvot

#endif
