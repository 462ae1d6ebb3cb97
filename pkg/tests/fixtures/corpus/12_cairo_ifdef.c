typedef struct {
    const char *name;
    int (*create)(void *closure);
} font_backend_t;

static int ft_create(void *closure) { return 1; }
static int fc_create(void *closure) { return 2; }
static int win_create(void *closure) { return 3; }

static const font_backend_t backends[] = {
    { "ft", ft_create },
#if CAIRO_HAS_FC_FONT
    { "fc", fc_create },
#endif
    { "win", win_create },
};

int backend_create(int i, void *closure)
{
    return backends[i].create(closure);
}
