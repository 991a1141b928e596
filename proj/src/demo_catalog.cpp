#include "flakyci/corpus_synth.hpp"

#include <array>

namespace flakyci {
namespace {

constexpr std::array<category_profile, 46> kCategories{{
    {"misconfigured_env_variable", "Environment Variables", 673, 35},
    {"container_already_exists", "Container Issues", 2, 1},
    {"container_not_found", "Container Issues", 31, 7},
    {"docker_daemon_connection_failure", "Container Issues", 325, 13},
    {"image_build_permission_denied", "Container Issues", 8, 1},
    {"image_build_read_error", "Container Issues", 17, 5},
    {"image_push_write_error", "Container Issues", 1, 1},
    {"image_security_scan_failure", "Container Issues", 8, 7},
    {"certificate_verification_failure", "Unauthorized Access", 56, 16},
    {"container_platform_auth_failure", "Unauthorized Access", 314, 34},
    {"repository_access_denied", "Unauthorized Access", 29, 9},
    {"docker_pull_limit_reached", "Limits Exceeded", 30, 5},
    {"cloud_token_limit_exceeded", "Limits Exceeded", 39, 6},
    {"job_execution_timeout", "Limits Exceeded", 306, 19},
    {"remote_call_timeout", "Limits Exceeded", 76, 22},
    {"runner_pod_waiting_timeout", "Limits Exceeded", 199, 34},
    {"stuck_or_timeout_failure", "Limits Exceeded", 14, 9},
    {"api_gateway_deployment_error", "Remote Resource Issues", 161, 6},
    {"image_not_found", "Remote Resource Issues", 221, 25},
    {"container_registry_server_error", "Remote Resource Issues", 213, 50},
    {"external_file_invalid_format", "Remote Resource Issues", 125, 8},
    {"http_resource_not_found", "Remote Resource Issues", 38, 6},
    {"service_unavailable", "Remote Resource Issues", 2, 2},
    {"connection_closed_reset_broken", "Networking Issues", 204, 38},
    {"connection_refused", "Networking Issues", 44, 11},
    {"host_resolution_failure", "Networking Issues", 91, 29},
    {"broker_connection_failure", "Networking Issues", 7, 2},
    {"ssl_connection_error", "Networking Issues", 16, 5},
    {"flaky_test", "Flaky Tests", 179, 11},
    {"helm_resource_error", "Infrastructure Issues", 99, 33},
    {"runner_image_pull_failure", "Infrastructure Issues", 99, 28},
    {"runner_instance_error", "Infrastructure Issues", 32, 8},
    {"runner_pod_failure", "Infrastructure Issues", 154, 32},
    {"runner_pod_not_found", "Infrastructure Issues", 10, 7},
    {"buggy_dependency", "Dependency Issues", 13, 4},
    {"dependencies_conflict_error", "Dependency Issues", 129, 4},
    {"dependency_installation_failure", "Dependency Issues", 124, 22},
    {"git_transient_error", "Transient VCS Errors", 113, 31},
    {"container_oom_error", "Memory Issues", 55, 11},
    {"testing_device_oom_error", "Memory Issues", 6, 5},
    {"static_analysis_tool_oom_error", "Memory Issues", 57, 8},
    {"repository_file_access_error", "Repository File Issues", 60, 10},
    {"repository_file_not_found", "Repository File Issues", 37, 10},
    {"apt_timezone_issue", "Internal OS Issues", 66, 7},
    {"os_cmd_execution_error", "Internal OS Issues", 12, 3},
    {"db_table_undefined", "Database Issues", 16, 1},
}};

struct demo_rule {
  std::string_view rule_id;
  std::string_view label;
  std::string_view pattern;
  std::string_view marker;
};

// Orders are 10, 20, ... in table order.
constexpr std::array<demo_rule, 51> kRules{{
    {"env_var_unset", "misconfigured_env_variable",
     R"(required environment variable \w+ is not set)",
     "ERROR: required environment variable DEPLOY_TOKEN is not set"},
    {"env_var_invalid", "misconfigured_env_variable",
     R"(environment variable \w+ has invalid value)",
     "ERROR: environment variable KUBE_NAMESPACE has invalid value 'stagin'"},
    {"container_name_in_use", "container_already_exists",
     R"(The container name "[^"]+" is already in use)",
     R"(Error response from daemon: Conflict. The container name "/build-helper" is already in use)"},
    {"no_such_container", "container_not_found",
     R"(Error: No such container: [0-9a-f]+)",
     "Error: No such container: 3f2a9c1d7be0"},
    {"docker_daemon_socket", "docker_daemon_connection_failure",
     R"(Cannot connect to the Docker daemon at \S+)",
     "Cannot connect to the Docker daemon at unix:///var/run/docker.sock. Is the docker daemon running?"},
    {"docker_daemon_unreachable", "docker_daemon_connection_failure",
     R"(error during connect: .*docker daemon unreachable)",
     "error during connect: Post http://docker:2375/v1.41/build: docker daemon unreachable"},
    {"image_build_denied", "image_build_permission_denied",
     R"(error building image: .*permission denied)",
     "error building image: failed to get filesystem from image: open /kaniko/.docker: permission denied"},
    {"dockerfile_read_io", "image_build_read_error",
     R"(failed to read dockerfile: .*input/output error)",
     "error building image: failed to read dockerfile: read /workspace/Dockerfile: input/output error"},
    {"image_push_short_write", "image_push_write_error",
     R"(error pushing image: failed to write layer)",
     "error pushing image: failed to write layer sha256:9e1f: short write"},
    {"security_scan_failed", "image_security_scan_failure",
     R"(Security scan failed: )",
     "Security scan failed: vulnerability database download error"},
    {"x509_unknown_authority", "certificate_verification_failure",
     R"(x509: certificate signed by unknown authority)",
     "tls: failed to verify certificate: x509: certificate signed by unknown authority"},
    {"platform_unauthorized", "container_platform_auth_failure",
     R"(You must be logged in to the server \(Unauthorized\))",
     "error: You must be logged in to the server (Unauthorized)"},
    {"git_http_access_denied", "repository_access_denied",
     R"(remote: HTTP Basic: Access denied)",
     "remote: HTTP Basic: Access denied"},
    {"docker_pull_rate_limit", "docker_pull_limit_reached",
     R"(toomanyrequests: You have reached your pull rate limit)",
     "toomanyrequests: You have reached your pull rate limit. You may increase the limit by authenticating and upgrading"},
    {"cloud_quota_exceeded", "cloud_token_limit_exceeded",
     R"(Quota exceeded for quota metric)",
     "ERROR: (gcloud.auth) Quota exceeded for quota metric 'Token requests' of service 'sts.googleapis.com'"},
    {"job_took_longer", "job_execution_timeout",
     R"(execution took longer than \S+ seconds)",
     "ERROR: Job failed: execution took longer than 1h0m0s seconds"},
    {"job_timeout_reached", "job_execution_timeout",
     R"(job execution timeout reached)",
     "ERROR: Job failed: job execution timeout reached, terminating"},
    {"client_timeout_headers", "remote_call_timeout",
     R"(Client\.Timeout exceeded while awaiting headers)",
     "Error: context deadline exceeded (Client.Timeout exceeded while awaiting headers)"},
    {"pod_start_timeout", "runner_pod_waiting_timeout",
     R"(timed out waiting for pod to start)",
     "ERROR: Job failed (system failure): timed out waiting for pod to start"},
    {"stuck_or_timeout", "stuck_or_timeout_failure",
     R"(stuck or timeout failure)",
     "ERROR: Job failed: stuck or timeout failure"},
    {"api_gateway_deploy", "api_gateway_deployment_error",
     R"(API gateway deployment failed)",
     "Error: API gateway deployment failed: stage 'prod' returned 409"},
    {"manifest_tag_unknown", "image_not_found",
     R"(manifest unknown: manifest tagged by "[^"]+" is not found)",
     R"(Error response from daemon: manifest unknown: manifest tagged by "1.4.2" is not found)"},
    {"registry_pull_5xx", "container_registry_server_error",
     R"(received unexpected HTTP status: 5\d\d)",
     "Error response from daemon: received unexpected HTTP status: 502 Bad Gateway"},
    {"registry_push_5xx", "container_registry_server_error",
     R"(blob upload unknown to registry: 5\d\d)",
     "error: blob upload unknown to registry: 500 Internal Server Error"},
    {"yaml_unmarshal", "external_file_invalid_format",
     R"(yaml: unmarshal errors:)",
     "Error: yaml: unmarshal errors: line 12: cannot unmarshal !!str into map[string]interface {}"},
    {"curl_404", "http_resource_not_found",
     R"(The requested URL returned error: 404)",
     "curl: (22) The requested URL returned error: 404"},
    {"upstream_503", "service_unavailable",
     R"(upstream responded: 503 Service Unavailable)",
     "upstream responded: 503 Service Unavailable"},
    {"connection_reset", "connection_closed_reset_broken",
     R"(connection reset by peer)",
     "read tcp 10.12.4.9:43122->10.0.3.4:443: read: connection reset by peer"},
    {"broken_pipe", "connection_closed_reset_broken",
     R"((?:write: broken pipe|connection closed unexpectedly))",
     "write tcp 10.12.4.9:43190->10.0.3.4:443: write: broken pipe"},
    {"connect_refused", "connection_refused",
     R"(connect: connection refused)",
     "dial tcp 10.42.0.7:5432: connect: connection refused"},
    {"resolve_host", "host_resolution_failure",
     R"(Could not resolve host: \S+)",
     "fatal: unable to access 'https://gitlab.internal.example/app.git/': Could not resolve host: gitlab.internal.example"},
    {"kafka_broker_transport", "broker_connection_failure",
     R"(Broker transport failure)",
     "KafkaError{code=_TRANSPORT,val=-195,str=\"Broker transport failure\"}"},
    {"ssl_syscall", "ssl_connection_error",
     R"(SSL_ERROR_SYSCALL in connection to)",
     "curl: (35) OpenSSL SSL_connect: SSL_ERROR_SYSCALL in connection to nexus.internal.example:443"},
    {"test_assertion_failed", "flaky_test",
     R"(FAILED \S+ - AssertionError:)",
     "FAILED tests/test_session.py::test_refresh_token - AssertionError: expected 200, got 401"},
    {"helm_operation_in_progress", "helm_resource_error",
     R"(UPGRADE FAILED: another operation \(install/upgrade/rollback\) is in progress)",
     "Error: UPGRADE FAILED: another operation (install/upgrade/rollback) is in progress"},
    {"runner_image_pull", "runner_image_pull_failure",
     R"(prepare environment: image pull failed)",
     "ERROR: Job failed (system failure): prepare environment: image pull failed: Back-off pulling image"},
    {"runner_unhealthy", "runner_instance_error",
     R"(runner instance is unhealthy)",
     "ERROR: Preparation failed: runner instance is unhealthy"},
    {"pod_status_failed", "runner_pod_failure",
     R"(pod status is Failed)",
     "ERROR: Job failed (system failure): pod status is Failed"},
    {"runner_pod_missing", "runner_pod_not_found",
     R"(pods "runner-[a-z0-9-]+" not found)",
     R"(ERROR: Job failed (system failure): pods "runner-x7k2p9-project-42" not found)"},
    {"python_import_name", "buggy_dependency",
     R"(ImportError: cannot import name '\w+' from '\w+')",
     "ImportError: cannot import name 'soft_unicode' from 'markupsafe'"},
    {"pip_conflicting_deps", "dependencies_conflict_error",
     R"(have conflicting dependencies)",
     "ERROR: Cannot install -r requirements.txt because these package versions have conflicting dependencies."},
    {"npm_install_error", "dependency_installation_failure",
     R"(npm ERR! code E[A-Z]+)",
     "npm ERR! code ETARGET"},
    {"git_remote_hung_up", "git_transient_error",
     R"(fatal: the remote end hung up unexpectedly)",
     "fatal: the remote end hung up unexpectedly"},
    {"exit_code_137", "container_oom_error",
     R"(exit code 137\b)",
     "ERROR: Job failed: command terminated with exit code 137"},
    {"device_out_of_memory", "testing_device_oom_error",
     R"(Not enough memory to run the test device)",
     "emulator: FATAL | Not enough memory to run the test device"},
    {"sonar_heap_space", "static_analysis_tool_oom_error",
     R"(SonarScanner execution java\.lang\.OutOfMemoryError)",
     "ERROR: Error during SonarScanner execution java.lang.OutOfMemoryError: Java heap space"},
    {"file_read_denied", "repository_file_access_error",
     R"(cannot open '[^']+' for reading: Permission denied)",
     "cp: cannot open 'build/config.json' for reading: Permission denied"},
    {"file_stat_missing", "repository_file_not_found",
     R"(cannot stat '[^']+': No such file or directory)",
     "cp: cannot stat 'dist/app.tar.gz': No such file or directory"},
    {"tzdata_prompt", "apt_timezone_issue",
     R"(Please select the geographic area in which you live)",
     "Please select the geographic area in which you live. Subsequent configuration questions will narrow this down"},
    {"sh_eval_syntax", "os_cmd_execution_error",
     R"(/bin/sh: \d+: eval: Syntax error)",
     "/bin/sh: 1: eval: Syntax error: end of file unexpected"},
    {"pg_undefined_table", "db_table_undefined",
     R"(UndefinedTable: relation "\w+" does not exist)",
     R"(psycopg2.errors.UndefinedTable: relation "orders" does not exist)"},
}};

constexpr std::array<std::string_view, 14> kFiller{{
    "Running with gitlab-runner 16.11.1 (535ced5f)",
    "  on k8s-runner-7 zXyT3q, system ID: r_8d2kfQm1",
    "Preparing the \"kubernetes\" executor",
    "Using Kubernetes namespace: ci-jobs",
    "Getting source from Git repository",
    "Fetching changes with git depth set to 20...",
    "Executing \"step_script\" stage of the job script",
    "$ make build",
    "Step 3/9 : RUN pip install -r requirements.txt",
    "Successfully installed requests-2.31.0 urllib3-2.2.1",
    "$ ./scripts/run-checks.sh --ci",
    "Uploading artifacts for failed job",
    "Cleaning up project directory and file based variables",
    "ERROR: Job failed: exit code 1",
}};

std::string_view group_of(std::string_view label) {
  for (const auto& c : kCategories)
    if (c.label == label) return c.group;
  return {};
}

}  // namespace

std::span<const category_profile> reference_categories() { return kCategories; }

rule_catalog demo_catalog() {
  std::vector<label_rule> rules;
  int order = 10;
  for (const auto& r : kRules) {
    label_rule rule;
    rule.order = order;
    rule.rule_id = std::string(r.rule_id);
    rule.label = std::string(r.label);
    rule.group = std::string(group_of(r.label));
    rule.pattern = std::string(r.pattern);
    rules.push_back(std::move(rule));
    order += 10;
  }
  return rule_catalog::from_rules(std::move(rules));
}

const std::map<std::string, std::string>& demo_markers() {
  static const std::map<std::string, std::string> markers = [] {
    std::map<std::string, std::string> m;
    for (const auto& r : kRules) m.emplace(r.rule_id, r.marker);
    return m;
  }();
  return markers;
}

std::span<const std::string_view> demo_filler_lines() { return kFiller; }

}  // namespace flakyci
