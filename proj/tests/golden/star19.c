double a[M][N][P], b[M][N][P];
double c0, c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13, c14, c15, c16, c17, c18;

for (long k = 3; k < M - 3; ++k) {
  for (long j = 3; j < N - 3; ++j) {
    for (long i = 3; i < P - 3; ++i) {
      b[k][j][i] = c0 * a[k][j][i]
          + c1 * a[k][j][i-3] + c2 * a[k][j][i-2]
          + c3 * a[k][j][i-1] + c4 * a[k][j-3][i]
          + c5 * a[k][j-2][i] + c6 * a[k][j-1][i]
          + c7 * a[k-3][j][i] + c8 * a[k-2][j][i]
          + c9 * a[k-1][j][i] + c10 * a[k+1][j][i]
          + c11 * a[k+2][j][i] + c12 * a[k+3][j][i]
          + c13 * a[k][j+1][i] + c14 * a[k][j+2][i]
          + c15 * a[k][j+3][i] + c16 * a[k][j][i+1]
          + c17 * a[k][j][i+2] + c18 * a[k][j][i+3];
    }
  }
}
