#include "h2o_types.h"

static void handle_request_body_chunk(h2o_http2_conn_t *conn, const char *buf, int len)
{
    (void)conn;
    (void)buf;
    (void)len;
}

static int handle_headers_frame(h2o_http2_conn_t *conn, h2o_http2_stream_t *stream, int end_stream)
{
    if (stream->state != H2O_HTTP2_STREAM_STATE_IDLE) {
        conn->last_error = H2O_HTTP2_ERROR_PROTOCOL;
        return -1;
    }
    stream->state = H2O_HTTP2_STREAM_STATE_RECV_HEADERS;
    if (!end_stream) {
        stream->state = H2O_HTTP2_STREAM_STATE_RECV_BODY;
        return 0;
    }
    stream->state = H2O_HTTP2_STREAM_STATE_REQ_PENDING;
    return 0;
}

static int handle_data_frame(h2o_http2_conn_t *conn, h2o_http2_stream_t *stream, const char *buf, int len)
{
    if (stream->state != H2O_HTTP2_STREAM_STATE_RECV_BODY)
        return 0;
    handle_request_body_chunk(conn, buf, len);
    return 0;
}

static void send_response(h2o_http2_stream_t *stream, int is_final)
{
    stream->state = H2O_HTTP2_STREAM_STATE_SEND_HEADERS;
    stream->state = H2O_HTTP2_STREAM_STATE_SEND_BODY;
    if (is_final) {
        stream->state = H2O_HTTP2_STREAM_STATE_SEND_BODY_IS_FINAL;
    }
    stream->state = H2O_HTTP2_STREAM_STATE_END_STREAM;
}
