#include <errno.h>
#include <stdio.h>
#include <stdlib.h>
#include <crusted.h>

int e_val(e_eq(0) || e_eq(EOF))
fclose_impl(FILE *fp) {
  // ...

  e_unchecked("FILE") {
    if (fp->flags == 0U) {
      errno = EBADF;
      return EOF;
    }
  }

  // ...
  return 0;
}
