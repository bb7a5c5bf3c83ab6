typedef enum smtp_phase {
    SMTP_GREET,
    SMTP_HELO,
    SMTP_MAIL,
    SMTP_RCPT,
    SMTP_DATA,
    SMTP_DONE
} smtp_phase_t;

typedef enum { REPLY_OK = 250, REPLY_START_INPUT = 354, REPLY_BAD_SEQUENCE = 503 } smtp_reply_t;

struct smtp_session {
    smtp_phase_t phase;
    smtp_reply_t reply;
};

static struct smtp_session session;

int smtp_on_line(const char *line, int is_data)
{
    if (is_data) {
        session.phase = SMTP_DONE;
        session.reply = REPLY_OK;
        return 0;
    }
    switch (line[0]) {
    case 'H':
        session.phase = SMTP_HELO;
        break;
    case 'M':
        session.phase = SMTP_MAIL;
        break;
    case 'R':
        session.phase = SMTP_RCPT;
        break;
    case 'D':
        session.phase = SMTP_DATA;
        session.reply = REPLY_START_INPUT;
        break;
    default:
        session.reply = REPLY_BAD_SEQUENCE;
        return -1;
    }
    return 0;
}
