#include <stdio.h>

typedef void (*isc_log_callback_t)(void *ctx, const char *msg);

struct isc_log {
    const char *tag;
    isc_log_callback_t error_callback;
};

void isc_log_error_callback(void *ctx, const char *msg)
{
    (void)ctx;
    fprintf(stderr, "log error: %s\n", msg);
}

void isc_log_set_error_callback(struct isc_log *lctx, isc_log_callback_t cb)
{
    lctx->error_callback = cb;
}

void isc_log_write_error(struct isc_log *lctx, const char *msg)
{
    lctx->error_callback(lctx, msg);
}

void isc_log_init(struct isc_log *lctx)
{
    isc_log_set_error_callback(lctx, isc_log_error_callback);
}
