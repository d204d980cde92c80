#include <stdlib.h>

int f(void) {
  char *p = (char *) calloc(4U, 1U);
  if (p == NULL) {
    return 1;
  }
  char *q = p;
  char c = *p;
  free(q);
  return c;
}
