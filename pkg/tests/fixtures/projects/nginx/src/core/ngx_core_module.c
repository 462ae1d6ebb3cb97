#include "ngx_conf_file.h"

static void *ngx_core_module_create_conf(ngx_conf_t *cf)
{
    return cf->ctx;
}

static char *ngx_core_module_init_conf(ngx_conf_t *cf, void *conf)
{
    return 0;
}

static ngx_core_module_t ngx_core_module_ctx = {
    "core",
    ngx_core_module_create_conf,
    ngx_core_module_init_conf
};
