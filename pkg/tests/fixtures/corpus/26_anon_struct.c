typedef struct {
    void (*start)(void);
    void (*stop)(void);
} lifecycle_t;

static void svc_start(void) { }
static void svc_stop(void) { }

lifecycle_t service = { .start = svc_start, .stop = svc_stop };

void restart(lifecycle_t *lc)
{
    lc->stop();
    lc->start();
}
