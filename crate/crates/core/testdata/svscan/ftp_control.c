#include <string.h>

enum ftp_state { FTP_CONNECTED, FTP_USER_OK, FTP_LOGGED_IN, FTP_RENAMING, FTP_QUIT };
enum log_level { LOG_ERROR, LOG_WARN, LOG_INFO, LOG_DEBUG };

static enum ftp_state g_state;
static enum log_level log_level;

void ftp_init(int verbose)
{
    log_level = verbose ? LOG_DEBUG : LOG_WARN;
    g_state = FTP_CONNECTED;
}

void ftp_command(const char *cmd)
{
    if (!strncmp(cmd, "USER", 4) && g_state == FTP_CONNECTED) {
        g_state = FTP_USER_OK;
    } else if (!strncmp(cmd, "PASS", 4) && g_state == FTP_USER_OK) {
        g_state = FTP_LOGGED_IN;
    } else if (!strncmp(cmd, "RNFR", 4) && g_state == FTP_LOGGED_IN) {
        g_state = FTP_RENAMING;
    } else if (!strncmp(cmd, "RNTO", 4) && g_state == FTP_RENAMING) {
        g_state = FTP_LOGGED_IN;
    } else if (!strncmp(cmd, "QUIT", 4)) {
        g_state = FTP_QUIT;
    }
}
