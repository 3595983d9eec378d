// generated by adaflow -- streaming dataflow engine sources
#include <ap_int.h>
#include <hls_stream.h>

// L0_linebuf: row-caching line buffer (FULL_WINDOW); stores KERNEL_H-1 rows and
// turns the pixel stream into sliding windows without full-tensor buffering
static const int IN_CHANNELS = 1;
static const int IN_HEIGHT   = 4;
static const int IN_WIDTH    = 4;
static const int KERNEL_H    = 3;
static const int KERNEL_W    = 3;
static const int STRIDE      = 1;
static const int ACT_BITS    = 8;

void L0_linebuf(hls::stream<ap_uint<8>> &in, hls::stream<ap_uint<8>> out[9]) {
    static ap_uint<8> rows[KERNEL_H - 1 > 0 ? KERNEL_H - 1 : 1][IN_WIDTH * IN_CHANNELS];
#pragma HLS ARRAY_PARTITION variable=rows complete dim=1
    ap_uint<8> window[KERNEL_H * KERNEL_W * IN_CHANNELS];
#pragma HLS ARRAY_PARTITION variable=window complete
    for (int y = 0; y < IN_HEIGHT; ++y) {
        for (int x = 0; x < IN_WIDTH; ++x) {
            for (int ch = 0; ch < IN_CHANNELS; ++ch) {
#pragma HLS PIPELINE II=1
                ap_uint<8> px = in.read();
                // shift the column, cache the row, assemble the window
                if (y >= KERNEL_H - 1 && x >= KERNEL_W - 1
                    && (y - (KERNEL_H - 1)) % STRIDE == 0
                    && (x - (KERNEL_W - 1)) % STRIDE == 0) {
                    for (int e = 0; e < 9; ++e)
                        out[e].write(window[e]);
                }
                rows[0][x * IN_CHANNELS + ch] = px;
            }
        }
    }
}
