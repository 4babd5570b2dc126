#include <stdio.h>
#include <stdlib.h>

#include "ssvep_cstl.h"

static int report(SsvepStatus s) {
  char msg[256];
  ssvep_last_error_message(msg, sizeof msg);
  fprintf(stderr, "status %d: %s\n", (int)s, msg);
  return 1;
}

int main(int argc, char **argv) {
  if (argc != 3) return 2;
  SsvepDecoder *dec = NULL;
  SsvepStatus s = ssvep_decoder_load(argv[1], &dec);
  if (s != SSVEP_STATUS_OK) return report(s);

  SsvepDecoderInfo info;
  ssvep_decoder_info(dec, &info);
  size_t n = info.n_channels * info.raw_len;
  double *buf = malloc(n * sizeof *buf);
  FILE *f = fopen(argv[2], "rb");
  if (!f || fread(buf, sizeof *buf, n, f) != n) return 3;
  fclose(f);

  SsvepPrediction p;
  s = ssvep_decoder_classify(dec, buf, info.n_channels, info.raw_len, info.fs_hz, &p, NULL, 0);
  if (s != SSVEP_STATUS_OK) return report(s);
  printf("%zu %.17g\n", p.class_index, p.confidence);

  s = ssvep_decoder_classify(dec, buf, info.n_channels, 3, info.fs_hz, &p, NULL, 0);
  if (s == SSVEP_STATUS_OK || ssvep_last_error_length() == 0) return 4;

  free(buf);
  ssvep_decoder_free(dec);
  return 0;
}
