/**
 * Backend selection: the WASM backend (XNNPACK) is an order of magnitude
 * faster than the pure-JS "cpu" backend for convolutions; fall back to "cpu"
 * if it cannot initialize.
 *
 * The WASM backend ships without the Conv2DBackpropFilter kernel, which
 * training needs. For the stride-1, dilation-1 convolutions used here the
 * filter gradient is itself a convolution —
 * dW[kh,kw,c,f] = sum_{b,y,x} X[b, y+kh-pt, x+kw-pl, c] * dY[b,y,x,f] —
 * so it is registered below in terms of the fast forward conv2d kernel.
 */
import * as tf from "@tensorflow/tfjs";

function registerConv2DBackpropFilter(backendName: string): void {
  if (tf.getKernel("Conv2DBackpropFilter", backendName)) return;
  tf.registerKernel({
    kernelName: "Conv2DBackpropFilter",
    backendName,
    kernelFunc: ({ inputs, attrs }) => {
      const { x, dy } = inputs as { x: tf.TensorInfo; dy: tf.TensorInfo };
      const { strides, pad, dataFormat, dilations, filterShape } = attrs as unknown as {
        strides: number | [number, number];
        pad: "valid" | "same" | number;
        dataFormat: "NHWC" | "NCHW";
        dilations: number | [number, number];
        filterShape: [number, number, number, number];
      };
      const strideOne = strides === 1 ||
        (Array.isArray(strides) && strides[0] === 1 && strides[1] === 1);
      const dilationOne = dilations == null || dilations === 1 ||
        (Array.isArray(dilations) && dilations[0] === 1 && dilations[1] === 1);
      if (!strideOne || !dilationOne || dataFormat !== "NHWC") {
        throw new Error("Conv2DBackpropFilter on wasm supports only stride 1, " +
          "dilation 1, NHWC");
      }
      const [kh, kw] = filterShape;
      let padTop = 0;
      let padLeft = 0;
      if (pad === "same") {
        padTop = Math.floor((kh - 1) / 2);
        padLeft = Math.floor((kw - 1) / 2);
      } else if (typeof pad === "number") {
        padTop = pad;
        padLeft = pad;
      }
      const padBottom = kh - 1 - padTop;
      const padRight = kw - 1 - padLeft;
      return tf.tidy(() => {
        const xt = tf.engine().makeTensorFromTensorInfo(x) as tf.Tensor4D;
        const dyt = tf.engine().makeTensorFromTensorInfo(dy) as tf.Tensor4D;
        const xPad = tf.pad(xt, [[0, 0], [padTop, padBottom],
                                 [padLeft, padRight], [0, 0]]);
        // channels become the batch axis, the upstream gradient the filter
        const xT = tf.transpose(xPad, [3, 1, 2, 0]); // [c, H+p, W+p, b]
        const dyT = tf.transpose(dyt, [1, 2, 0, 3]); // [Ho, Wo, b, f]
        const dw = tf.conv2d(xT, dyT as unknown as tf.Tensor4D, 1, "valid");
        const out = tf.transpose(dw, [1, 2, 0, 3]); // [kh, kw, c, f]
        return tf.engine().keep(out);
      });
    },
  });
}

let initialized: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  if (!initialized) {
    initialized = (async () => {
      try {
        await import("@tensorflow/tfjs-backend-wasm");
        if (await tf.setBackend("wasm")) {
          await tf.ready();
          registerConv2DBackpropFilter("wasm");
          return tf.getBackend();
        }
      } catch {
        // fall through to the default backend
      }
      await tf.setBackend("cpu");
      await tf.ready();
      return tf.getBackend();
    })();
  }
  return initialized;
}
